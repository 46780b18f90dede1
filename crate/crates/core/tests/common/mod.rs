#![allow(dead_code)]

use std::net::SocketAddr;
use std::sync::Arc;
use std::time::Duration;

use lexwm::detector::VerifyParams;
use lexwm::lexicon::{FrequencyLexeme, SubstitutionKind};
use lexwm::service::{router, ServiceState, Upstream};
use lexwm::{Lexicon, SubstitutionGroup, WatermarkKey, Watermarker};
use rand::Rng;

/// Letters-only encoding of `i`, so generated words stay single tokens.
pub fn code(mut i: usize) -> String {
    let mut s = Vec::new();
    loop {
        s.push(b'a' + (i % 26) as u8);
        i /= 26;
        if i == 0 {
            break;
        }
    }
    s.reverse();
    String::from_utf8(s).unwrap()
}

pub fn candidate(g: usize) -> String {
    format!("cand{}", code(g))
}

pub fn substitute(g: usize, j: usize) -> String {
    format!("sub{}x{}", code(j), code(g))
}

/// `groups` disjoint synonym groups of size `M + 1`.
pub fn synthetic_lexicon(groups: usize, m: usize) -> Lexicon {
    let gs = (0..groups)
        .map(|g| SubstitutionGroup::new(candidate(g), (0..m).map(|j| substitute(g, j)).collect(), SubstitutionKind::Synonym))
        .collect();
    Lexicon::new(SubstitutionKind::Synonym, m, gs).unwrap()
}

/// Lexemes with five synonyms each and strictly decreasing frequency.
pub fn synthetic_lexemes(count: usize) -> Vec<FrequencyLexeme> {
    (0..count)
        .map(|g| {
            FrequencyLexeme::new(candidate(g), "ADJ", (count - g) as u64 * 10, (0..5).map(|j| substitute(g, j)).collect())
                .unwrap()
        })
        .collect()
}

pub fn key(label: &str) -> WatermarkKey {
    WatermarkKey::new(format!("{label:0>16}").into_bytes()).unwrap()
}

pub fn random_key(rng: &mut impl Rng) -> WatermarkKey {
    WatermarkKey::new((0..32).map(|_| rng.random::<u8>()).collect::<Vec<u8>>()).unwrap()
}

pub const FILLER: &[&str] = &[
    "the", "a", "plan", "river", "model", "said", "we", "output", "text", "over", "of", "was", "and", "quickly",
];

pub fn filler_word(rng: &mut impl Rng) -> &'static str {
    FILLER[rng.random_range(0..FILLER.len())]
}

pub struct TestServer {
    pub addr: SocketAddr,
    pub state: Arc<ServiceState>,
    handle: tokio::task::JoinHandle<()>,
}

impl TestServer {
    pub fn url(&self, path: &str) -> String {
        format!("http://{}{}", self.addr, path)
    }
}

impl Drop for TestServer {
    fn drop(&mut self) {
        self.handle.abort();
    }
}

pub async fn spawn_service(
    wm: Watermarker,
    upstream: Upstream,
    timeout: Duration,
    max_body: usize,
    token: Option<&str>,
) -> TestServer {
    let state = Arc::new(
        ServiceState::new(wm, upstream, timeout, max_body, token.map(str::to_owned), VerifyParams::default()).unwrap(),
    );
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    let app = router(Arc::clone(&state));
    let handle = tokio::spawn(async move {
        axum::serve(listener, app).await.unwrap();
    });
    TestServer { addr, state, handle }
}
