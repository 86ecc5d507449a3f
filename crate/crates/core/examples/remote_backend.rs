//! Talk to a model server over HTTP. To stay self-contained this example
//! starts a tiny sidecar on a local port that answers the JSON protocol with
//! the mock scorer; point `RemoteConfig` at a real server to use a model.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::thread;

use glossdom::dataset::GlossRecord;
use glossdom::engine::{classify, EngineConfig};
use glossdom::labelspace::babeldomains;
use glossdom::scorer::{wire, CountingScorer, MockScorer, RemoteConfig, RemoteScorer};

/// Minimal HTTP/1.1 loop: read one request, answer it, close.
fn serve(listener: TcpListener) {
    let scorer = MockScorer::named("sidecar-mock");
    for stream in listener.incoming().flatten() {
        let mut reader = BufReader::new(stream);
        let mut length = 0;
        let mut line = String::new();
        while reader.read_line(&mut line).is_ok_and(|n| n > 2) {
            if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                length = v.trim().parse().unwrap_or(0);
            }
            line.clear();
        }
        let mut body = vec![0; length];
        if reader.read_exact(&mut body).is_err() {
            continue;
        }
        let (status, reply) = wire::handle_request(&scorer, &String::from_utf8_lossy(&body));
        let mut stream = reader.into_inner();
        let _ = write!(
            stream,
            "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{reply}",
            reply.len()
        );
    }
}

fn main() -> glossdom::Result<()> {
    let listener = TcpListener::bind("127.0.0.1:0").expect("bind");
    let url = format!("http://{}", listener.local_addr().expect("addr"));
    thread::spawn(move || serve(listener));

    let remote = CountingScorer::new(RemoteScorer::new(RemoteConfig::new(&url, "sidecar-mock"))?);
    let gloss = GlossRecord::new("g", "a health worker trained in medicine who treats patients");
    let cfg = EngineConfig::default().with_descriptors(true);
    let ranked = classify(&gloss, &babeldomains(), &cfg, &remote)?;

    println!("backend {url}");
    println!("top label {} ({:.4})", ranked.top_label().unwrap_or("-"), ranked.top_probability());
    let counts = remote.counts();
    println!("{} requests, {} scored pairs", counts.requests, counts.total());
    Ok(())
}
