#![allow(dead_code)]

use std::net::SocketAddr;
use std::path::Path;
use std::sync::Arc;

use futures::StreamExt;
use serde_json::Value;

use taskguide::config::{ChatBackend, ServiceConfig};
use taskguide::runtime::{Providers, Service, StreamEvent};
use taskguide_core::fixture::JUICE_MIXER_JSON;

pub fn config(dir: &Path) -> ServiceConfig {
    ServiceConfig {
        data_dir: dir.to_path_buf(),
        ..ServiceConfig::default()
    }
}

pub fn mock_config(dir: &Path) -> ServiceConfig {
    let mut c = config(dir);
    c.providers.chat = ChatBackend::Mock;
    c
}

pub struct Server {
    pub addr: SocketAddr,
    pub service: Arc<Service>,
    pub client: reqwest::Client,
    task: tokio::task::JoinHandle<()>,
}

impl Server {
    pub async fn start(config: ServiceConfig) -> Self {
        let providers = Providers::from_config(&config);
        Self::with_providers(config, providers).await
    }

    pub async fn with_providers(config: ServiceConfig, providers: Providers) -> Self {
        let service = Service::open(config, providers).unwrap();
        let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
        let addr = listener.local_addr().unwrap();
        let app = taskguide::api::router(service.clone());
        let task = tokio::spawn(async move {
            axum::serve(listener, app).await.unwrap();
        });
        Self {
            addr,
            service,
            client: reqwest::Client::new(),
            task,
        }
    }

    pub fn url(&self, path: &str) -> String {
        format!("http://{}{}", self.addr, path)
    }

    pub async fn post_json(&self, path: &str, body: Value) -> (u16, Value) {
        let r = self.client.post(self.url(path)).json(&body).send().await.unwrap();
        let status = r.status().as_u16();
        (status, r.json().await.unwrap_or(Value::Null))
    }

    pub async fn get_json(&self, path: &str) -> (u16, Value) {
        let r = self.client.get(self.url(path)).send().await.unwrap();
        let status = r.status().as_u16();
        (status, r.json().await.unwrap_or(Value::Null))
    }

    /// Ingests the fixture and compiles its default guide.
    pub async fn fixture(&self) -> (String, String) {
        let r = self
            .client
            .post(self.url("/transcripts"))
            .body(JUICE_MIXER_JSON)
            .send()
            .await
            .unwrap();
        assert_eq!(r.status().as_u16(), 201);
        let t: Value = r.json().await.unwrap();
        let tid = t["id"].as_str().unwrap().to_string();
        let (status, g) = self.post_json(&format!("/transcripts/{tid}/guide"), Value::Null).await;
        assert_eq!(status, 201, "{g}");
        (tid, g["id"].as_str().unwrap().to_string())
    }

    pub async fn session(&self, tid: &str, gid: &str, twin: bool) -> String {
        let (status, s) = self
            .post_json("/sessions", serde_json::json!({"transcript_id": tid, "guide_id": gid, "twin": twin}))
            .await;
        assert_eq!(status, 201, "{s}");
        s["session_id"].as_str().unwrap().to_string()
    }

    pub async fn say(&self, sid: &str, text: &str) -> (u16, Value) {
        self.post_json(&format!("/sessions/{sid}/turns"), serde_json::json!({"text": text}))
            .await
    }

    /// Reads SSE events from the session stream until `count` have arrived.
    pub async fn read_stream(&self, sid: &str, after: Option<u64>, count: usize) -> Vec<StreamEvent> {
        let url = match after {
            Some(a) => self.url(&format!("/sessions/{sid}/stream?after={a}")),
            None => self.url(&format!("/sessions/{sid}/stream")),
        };
        let r = self.client.get(url).send().await.unwrap();
        assert_eq!(r.status().as_u16(), 200);
        let mut bytes = r.bytes_stream();
        let mut buf = String::new();
        let mut out = Vec::new();
        let deadline = tokio::time::Instant::now() + std::time::Duration::from_secs(10);
        while out.len() < count {
            let chunk = tokio::time::timeout_at(deadline, bytes.next())
                .await
                .expect("stream stalled")
                .expect("stream ended")
                .unwrap();
            buf.push_str(std::str::from_utf8(&chunk).unwrap());
            while let Some(end) = buf.find("\n\n") {
                let frame: String = buf.drain(..end + 2).collect();
                for line in frame.lines() {
                    if let Some(data) = line.strip_prefix("data: ").or_else(|| line.strip_prefix("data:")) {
                        out.push(serde_json::from_str(data).unwrap());
                    }
                }
            }
        }
        out
    }

    pub fn stop(self) -> Arc<Service> {
        self.task.abort();
        self.service
    }
}
