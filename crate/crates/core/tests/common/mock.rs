//! A tiny HTTP service standing in for remote scorers and embedders.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;

use serde_json::Value;
use tiny_http::{Header, Response, Server};

type Handler = dyn Fn(&str, &Value) -> (u16, String) + Send + Sync;

pub struct MockServer {
    pub url: String,
    hits: Arc<AtomicUsize>,
    server: Arc<Server>,
    thread: Option<JoinHandle<()>>,
}

impl MockServer {
    /// Serves every request with `handler(path, json_body)`.
    pub fn start(handler: impl Fn(&str, &Value) -> (u16, String) + Send + Sync + 'static) -> Self {
        let server = Arc::new(Server::http("127.0.0.1:0").expect("bind mock server"));
        let url = format!("http://{}", server.server_addr().to_ip().expect("ip listener"));
        let hits = Arc::new(AtomicUsize::new(0));
        let handler: Arc<Handler> = Arc::new(handler);
        let thread = {
            let server = Arc::clone(&server);
            let hits = Arc::clone(&hits);
            std::thread::spawn(move || {
                for mut request in server.incoming_requests() {
                    hits.fetch_add(1, Ordering::SeqCst);
                    let mut body = String::new();
                    let _ = request.as_reader().read_to_string(&mut body);
                    let json: Value = serde_json::from_str(&body).unwrap_or(Value::Null);
                    let (status, reply) = handler(request.url(), &json);
                    let header = Header::from_bytes("Content-Type", "application/json").unwrap();
                    let response = Response::from_string(reply).with_status_code(status).with_header(header);
                    let _ = request.respond(response);
                }
            })
        };
        Self {
            url,
            hits,
            server,
            thread: Some(thread),
        }
    }

    pub fn hits(&self) -> usize {
        self.hits.load(Ordering::SeqCst)
    }
}

impl Drop for MockServer {
    fn drop(&mut self) {
        self.server.unblock();
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

pub fn texts(body: &Value) -> Vec<String> {
    body["texts"]
        .as_array()
        .map(|a| a.iter().filter_map(|t| t.as_str().map(str::to_string)).collect())
        .unwrap_or_default()
}

/// A perplexity service answering a constant for every text.
pub fn constant_perplexity(value: &'static str) -> MockServer {
    MockServer::start(move |_, body| {
        let n = texts(body).len();
        let ppl = vec![value; n].join(",");
        (200, format!("{{\"perplexities\":[{ppl}],\"model\":\"mock\",\"log_base\":2}}"))
    })
}

/// An address with nothing listening.
pub fn dead_url() -> String {
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    drop(listener);
    format!("http://{addr}")
}
