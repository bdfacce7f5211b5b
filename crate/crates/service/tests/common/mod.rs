#![allow(dead_code)]

use std::net::SocketAddr;
use std::time::Duration;

use futures_util::{SinkExt, StreamExt};
use serde_json::Value;
use tokio::net::TcpStream;
use tokio::time::{timeout, Instant};
use tokio_tungstenite::tungstenite::Message;
use tokio_tungstenite::{connect_async, MaybeTlsStream, WebSocketStream};

pub type Socket = WebSocketStream<MaybeTlsStream<TcpStream>>;

pub fn local() -> SocketAddr {
    "127.0.0.1:0".parse().unwrap()
}

/// Connects and returns the socket with the session config message.
pub async fn connect(addr: SocketAddr) -> (Socket, Value) {
    let (mut ws, _) = connect_async(format!("ws://{addr}/ws")).await.expect("connect");
    let hello = next_json(&mut ws).await.expect("config message");
    assert!(hello.get("config").is_some(), "{hello}");
    (ws, hello)
}

pub async fn next_json(ws: &mut Socket) -> Option<Value> {
    loop {
        match timeout(Duration::from_secs(5), ws.next()).await.ok()?? {
            Ok(Message::Text(t)) => return Some(serde_json::from_str(&t).expect("valid json")),
            Ok(_) => continue,
            Err(_) => return None,
        }
    }
}

pub async fn send(ws: &mut Socket, text: &str) {
    ws.send(Message::Text(text.to_string())).await.unwrap();
}

pub fn is_frame(v: &Value) -> bool {
    v.get("state").is_some()
}

/// Collects every message for `span` of wall-clock time.
pub async fn collect_for(ws: &mut Socket, span: Duration) -> Vec<(Instant, Value)> {
    let end = Instant::now() + span;
    let mut out = Vec::new();
    while Instant::now() < end {
        match timeout(end - Instant::now(), ws.next()).await {
            Ok(Some(Ok(Message::Text(t)))) => out.push((Instant::now(), serde_json::from_str(&t).unwrap())),
            Ok(Some(Ok(_))) => {}
            _ => break,
        }
    }
    out
}

pub fn frames(messages: &[(Instant, Value)]) -> Vec<Value> {
    messages.iter().filter(|(_, v)| is_frame(v)).map(|(_, v)| v.clone()).collect()
}

pub fn times(frames: &[Value]) -> Vec<f64> {
    frames.iter().map(|f| f["t"].as_f64().unwrap()).collect()
}
