#![allow(dead_code)]

//! A live service on an ephemeral port and a small JSON client for it.

use std::net::SocketAddr;

use percent_encoding::{utf8_percent_encode, NON_ALPHANUMERIC};
use reqwest::{Client, StatusCode};
use serde_json::{json, Value};
use softlogic::fixture::builtin;
use softlogic::server::{serve, ServiceConfig};

pub struct Api {
    pub base: String,
    pub client: Client,
}

pub async fn start(config: ServiceConfig) -> Api {
    let (tx, rx) = tokio::sync::oneshot::channel::<SocketAddr>();
    tokio::spawn(async move {
        serve("127.0.0.1:0".parse().unwrap(), config, |addr| {
            let _ = tx.send(addr);
        })
        .await
        .unwrap();
    });
    let addr = rx.await.expect("service bound");
    Api { base: format!("http://{addr}"), client: Client::new() }
}

pub fn encode(atom: &str) -> String {
    utf8_percent_encode(atom, NON_ALPHANUMERIC).to_string()
}

impl Api {
    async fn send(&self, req: reqwest::RequestBuilder) -> (StatusCode, Value) {
        let resp = req.send().await.expect("request sent");
        let status = resp.status();
        let text = resp.text().await.unwrap();
        let body =
            if text.is_empty() { Value::Null } else { serde_json::from_str(&text).expect("json body") };
        (status, body)
    }

    pub async fn get(&self, path: &str) -> (StatusCode, Value) {
        self.send(self.client.get(format!("{}{path}", self.base))).await
    }

    pub async fn post(&self, path: &str, body: Value) -> (StatusCode, Value) {
        self.send(self.client.post(format!("{}{path}", self.base)).json(&body)).await
    }

    pub async fn post_empty(&self, path: &str) -> (StatusCode, Value) {
        self.send(self.client.post(format!("{}{path}", self.base))).await
    }

    pub async fn delete(&self, path: &str) -> (StatusCode, Value) {
        self.send(self.client.delete(format!("{}{path}", self.base))).await
    }

    /// Creates a session from a shipped fixture and returns its id.
    pub async fn create_fixture(&self, name: &str) -> String {
        let f = builtin(name).unwrap();
        let (status, body) =
            self.post("/sessions", json!({"program": f.program_text, "atoms": f.atoms_text})).await;
        assert_eq!(status, StatusCode::CREATED, "{body}");
        body["id"].as_str().unwrap().to_string()
    }
}

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn beliefs(body: &Value) -> Vec<(String, f64)> {
    body["beliefs"]
        .as_array()
        .map(|a| {
            a.iter().map(|b| (b["id"].as_str().unwrap().to_string(), b["belief"].as_f64().unwrap())).collect()
        })
        .unwrap_or_default()
}

/// create, infer, rag, explanation, freeze, thaw on the weiss fixture,
/// checking revisions and that every payload agrees with its revision.
pub async fn coherence_script() -> Result<(), String> {
    let api = start(ServiceConfig::default()).await;
    let id = api.create_fixture("weiss").await;
    let mut last = 0;
    let mut advance = |rev: u64, what: &str| {
        let ok = rev >= last;
        let msg = format!("{what}: revision {rev} after {last}");
        last = rev;
        check(ok, || msg)
    };

    let (st, atoms) = api.get(&format!("/sessions/{id}/atoms")).await;
    check(st == StatusCode::OK, || format!("atoms: {st}"))?;
    advance(atoms["revision"].as_u64().unwrap(), "atoms")?;

    let (st, solved) = api.post_empty(&format!("/sessions/{id}/infer")).await;
    check(st == StatusCode::OK, || format!("infer: {st} {solved}"))?;
    let rev = solved["revision"].as_u64().unwrap();
    advance(rev, "infer")?;
    check(rev == 1, || format!("first solve published revision {rev}"))?;
    let solved_beliefs = beliefs(&solved);

    let (st, rag) = api.get(&format!("/sessions/{id}/rag")).await;
    check(st == StatusCode::OK, || format!("rag: {st}"))?;
    check(rag["revision"].as_u64() == Some(rev), || format!("rag revision {}", rag["revision"]))?;
    for node in rag["nodes"].as_array().unwrap().iter().filter(|n| n["kind"] == "atom") {
        let id = node["id"].as_str().unwrap();
        let want = solved_beliefs.iter().find(|(a, _)| a == id).map(|p| p.1);
        check(node["belief"].as_f64() == want, || format!("rag belief of {id} differs from solve"))?;
    }

    let verb = "Pcat('weiß','VERB')";
    let (st, expl) = api.get(&format!("/sessions/{id}/atoms/{}/explanation", encode(verb))).await;
    check(st == StatusCode::OK, || format!("explanation: {st} {expl}"))?;
    check(expl["revision"].as_u64() == Some(rev), || "explanation revision".into())?;
    let want = solved_beliefs.iter().find(|(a, _)| a == verb).map(|p| p.1);
    check(expl["belief"].as_f64() == want, || "explanation belief differs from solve".into())?;

    let (st, again) = api.post_empty(&format!("/sessions/{id}/infer")).await;
    check(st == StatusCode::OK && again["revision"].as_u64() == Some(rev), || {
        format!("repeated infer moved to {}", again["revision"])
    })?;

    let (st, frozen) =
        api.post(&format!("/sessions/{id}/freeze"), json!({"pins": [{"atom": verb, "belief": 0.8}]})).await;
    check(st == StatusCode::OK, || format!("freeze: {st} {frozen}"))?;
    let frozen_rev = frozen["revision"].as_u64().unwrap();
    check(frozen_rev == rev + 1, || format!("freeze revision {frozen_rev}"))?;
    advance(frozen_rev, "freeze")?;
    let after = beliefs(&frozen);
    check(after.iter().any(|(a, b)| a == verb && *b == 0.8), || "pin not honoured".into())?;
    check(frozen["deltas"].as_array().is_some_and(|d| !d.is_empty()), || "freeze reported no deltas".into())?;

    let (_, rag) = api.get(&format!("/sessions/{id}/rag")).await;
    check(rag["revision"].as_u64() == Some(frozen_rev), || "rag not refreshed after freeze".into())?;
    let (_, atoms) = api.get(&format!("/sessions/{id}/atoms?pattern={}", encode("Pcat(*,'VERB')"))).await;
    check(atoms["revision"].as_u64() == Some(frozen_rev), || "atoms revision after freeze".into())?;
    check(
        atoms["atoms"][0]["status"] == "frozen" && atoms["atoms"][0]["belief"].as_f64() == Some(0.8),
        || format!("atoms after freeze: {atoms}"),
    )?;

    let (st, thawed) = api.post_empty(&format!("/sessions/{id}/thaw")).await;
    check(st == StatusCode::OK, || format!("thaw: {st} {thawed}"))?;
    let thawed_rev = thawed["revision"].as_u64().unwrap();
    check(thawed_rev == frozen_rev + 1, || format!("thaw revision {thawed_rev}"))?;
    advance(thawed_rev, "thaw")?;
    let (_, expl) = api.get(&format!("/sessions/{id}/atoms/{}/explanation", encode(verb))).await;
    check(expl["revision"].as_u64() == Some(thawed_rev), || "explanation revision after thaw".into())?;
    let want = beliefs(&thawed).into_iter().find(|(a, _)| a == verb).map(|p| p.1);
    check(expl["belief"].as_f64() == want, || "explanation belief after thaw".into())?;
    let (_, atoms) = api.get(&format!("/sessions/{id}/atoms?pattern={}", encode("Pcat(*,'VERB')"))).await;
    check(atoms["atoms"][0]["status"] == "open", || format!("status after thaw: {atoms}"))?;
    Ok(())
}
