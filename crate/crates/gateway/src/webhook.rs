//! Outbound alert delivery.
//!
//! Each alert is POSTed as JSON to a configured URL from a background task.
//! Delivery is at-least-once while the process lives: a failed attempt is
//! retried with exponential backoff until `max_attempts` is reached, after
//! which the alert stays available through the alert feed only.

use std::time::Duration;

use medforge_core::store::Alert;
use tokio::sync::mpsc;
use tokio::task::JoinHandle;

#[derive(Debug, Clone)]
pub struct WebhookConfig {
    pub url: String,
    pub max_attempts: u32,
    pub initial_backoff: Duration,
    pub timeout: Duration,
}

impl WebhookConfig {
    pub fn new(url: impl Into<String>) -> WebhookConfig {
        WebhookConfig {
            url: url.into(),
            max_attempts: 8,
            initial_backoff: Duration::from_millis(200),
            timeout: Duration::from_secs(10),
        }
    }
}

#[derive(Clone)]
pub struct Webhook {
    tx: mpsc::UnboundedSender<Alert>,
}

impl Webhook {
    /// Starts the delivery task on the current runtime.
    pub fn spawn(config: WebhookConfig) -> (Webhook, JoinHandle<()>) {
        let (tx, rx) = mpsc::unbounded_channel();
        let handle = tokio::spawn(deliver_all(config, rx));
        (Webhook { tx }, handle)
    }

    pub fn enqueue(&self, alert: Alert) {
        if self.tx.send(alert).is_err() {
            tracing::warn!("webhook task has stopped; alert not forwarded");
        }
    }
}

async fn deliver_all(config: WebhookConfig, mut rx: mpsc::UnboundedReceiver<Alert>) {
    let client = match reqwest::Client::builder().timeout(config.timeout).build() {
        Ok(c) => c,
        Err(e) => {
            tracing::error!("cannot build webhook client: {e}");
            return;
        }
    };
    while let Some(alert) = rx.recv().await {
        deliver(&client, &config, &alert).await;
    }
}

async fn deliver(client: &reqwest::Client, config: &WebhookConfig, alert: &Alert) -> bool {
    let body = match serde_json::to_vec(alert) {
        Ok(b) => b,
        Err(e) => {
            tracing::error!(alert_id = alert.alert_id, "cannot serialize alert: {e}");
            return false;
        }
    };
    let mut backoff = config.initial_backoff;
    for attempt in 1..=config.max_attempts {
        let sent = client
            .post(&config.url)
            .header(reqwest::header::CONTENT_TYPE, "application/json")
            .body(body.clone())
            .send()
            .await;
        match sent {
            Ok(resp) if resp.status().is_success() => return true,
            Ok(resp) => {
                tracing::warn!(alert_id = alert.alert_id, attempt, status = %resp.status(), "webhook rejected alert")
            }
            Err(e) => tracing::warn!(alert_id = alert.alert_id, attempt, "webhook unreachable: {e}"),
        }
        if attempt < config.max_attempts {
            tokio::time::sleep(backoff).await;
            backoff = (backoff * 2).min(Duration::from_secs(60));
        }
    }
    tracing::error!(alert_id = alert.alert_id, "giving up on webhook delivery");
    false
}
