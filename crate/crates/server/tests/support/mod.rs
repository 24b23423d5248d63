#![allow(dead_code)]

use std::time::Duration;

use futures_util::{SinkExt, StreamExt};
use serde_json::Value;
use tokio::net::TcpStream;
use tokio_tungstenite::tungstenite::Message;
use tokio_tungstenite::{connect_async, MaybeTlsStream, WebSocketStream};

use rhino_core::skillspec::builtin_scenarios;
use rhino_server::{AppState, ServerConfig};

pub struct Server {
    pub base: String,
    pub state: AppState,
}

impl Server {
    pub async fn start(config: ServerConfig) -> Self {
        let state = AppState::new(builtin_scenarios(), config);
        let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
        let addr = listener.local_addr().unwrap();
        tokio::spawn(rhino_server::serve(listener, state.clone()));
        Self {
            base: format!("http://{addr}"),
            state,
        }
    }

    pub async fn create(&self, body: Value) -> Value {
        let res = reqwest::Client::new()
            .post(format!("{}/sessions", self.base))
            .json(&body)
            .send()
            .await
            .unwrap();
        assert_eq!(res.status(), 201);
        res.json().await.unwrap()
    }

    pub async fn trace(&self, id: &str) -> String {
        reqwest::get(format!("{}/sessions/{id}/trace", self.base))
            .await
            .unwrap()
            .text()
            .await
            .unwrap()
    }

    pub async fn connect(&self, id: &str) -> Client {
        let url = format!("{}/sessions/{id}/ws", self.base.replacen("http", "ws", 1));
        let (ws, _) = connect_async(url).await.unwrap();
        let mut c = Client { ws };
        let hello = c.next().await.expect("hello");
        assert_eq!(hello["t"], "hello");
        c
    }
}

pub struct Client {
    pub ws: WebSocketStream<MaybeTlsStream<TcpStream>>,
}

impl Client {
    pub async fn send(&mut self, v: Value) {
        self.send_text(&v.to_string()).await;
    }

    pub async fn send_text(&mut self, text: &str) {
        self.ws.send(Message::Text(text.to_string())).await.unwrap();
    }

    /// Next JSON frame, or `None` once the server closes the socket or
    /// nothing arrives for five seconds.
    pub async fn next(&mut self) -> Option<Value> {
        loop {
            let msg = tokio::time::timeout(Duration::from_secs(5), self.ws.next())
                .await
                .ok()??
                .ok()?;
            match msg {
                Message::Text(t) => return Some(serde_json::from_str(&t).unwrap()),
                Message::Close(_) => return None,
                _ => {}
            }
        }
    }

    /// Skips frames until one matches, returning it.
    pub async fn until(&mut self, mut pred: impl FnMut(&Value) -> bool) -> Value {
        loop {
            let v = self.next().await.expect("frame before timeout");
            if pred(&v) {
                return v;
            }
        }
    }

    /// Sends `step` and waits for its answer, collecting the frames seen on
    /// the way.
    pub async fn step(&mut self, n: u64) -> Vec<Value> {
        self.send(serde_json::json!({"t": "step", "n": n})).await;
        let mut seen = Vec::new();
        loop {
            let v = self.next().await.expect("stepped");
            if v["t"] == "stepped" {
                return seen;
            }
            seen.push(v);
        }
    }

    /// Steps and returns the snapshot taken at the resulting tick, which may
    /// arrive before or after `stepped`.
    pub async fn step_snapshot(&mut self, n: u64) -> Value {
        self.send(serde_json::json!({"t": "step", "n": n})).await;
        let mut tick = None;
        let mut snap: Option<Value> = None;
        loop {
            let v = self.next().await.expect("frame before timeout");
            if v["t"] == "stepped" {
                tick = v["tick"].as_u64();
            } else if v["t"] == "snapshot" {
                snap = Some(v);
            }
            if let (Some(t), Some(s)) = (tick, &snap) {
                if s["tick"].as_u64() == Some(t) {
                    return snap.unwrap();
                }
            }
        }
    }
}
