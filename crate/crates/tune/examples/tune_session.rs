//! Drives the tuning service in process: upload, degrade, compare against a
//! reference spectrum, then save and export a preset.
//!
//! `cargo run -p ulfsim-tune --example tune_session`

use std::sync::Arc;

use axum::body::Body;
use axum::http::Request;
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;
use ulfsim::kspace::DegradationParams;
use ulfsim::nifti::{encode_volume, DataType};
use ulfsim::Volume;
use ulfsim_tune::{router, AppState, PresetStore, DEFAULT_CACHE_BYTES, DEFAULT_MAX_UPLOAD_BYTES};

async fn call(app: &Router, req: Request<Body>) -> (u16, Vec<u8>) {
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status().as_u16();
    (
        status,
        resp.into_body()
            .collect()
            .await
            .unwrap()
            .to_bytes()
            .to_vec(),
    )
}

async fn post_json(app: &Router, uri: &str, body: Value) -> Value {
    let req = Request::post(uri)
        .header("content-type", "application/json")
        .body(Body::from(body.to_string()))
        .unwrap();
    let (status, bytes) = call(app, req).await;
    println!("POST {uri} -> {status}");
    serde_json::from_slice(&bytes).unwrap()
}

async fn get(app: &Router, uri: &str) -> Vec<u8> {
    let (status, bytes) = call(app, Request::get(uri).body(Body::empty()).unwrap()).await;
    println!("GET {uri} -> {status}");
    bytes
}

fn phantom(n: usize, texture: f64) -> Volume {
    let c = (n as f64 - 1.0) / 2.0;
    Volume::from_fn([n, n, n], [1.0; 3], |x, y, z| {
        let r2 =
            ((x as f64 - c).powi(2) + (y as f64 - c).powi(2) + (z as f64 - c).powi(2)) / (c * c);
        (1.0 - r2).max(0.0) + texture * ((x + y + z) % 2) as f64
    })
    .unwrap()
}

#[tokio::main]
async fn main() {
    let state = Arc::new(AppState::new(DEFAULT_CACHE_BYTES, PresetStore::in_memory()));
    let app = router(state, DEFAULT_MAX_UPLOAD_BYTES);

    let upload = |v: Volume| {
        Request::post("/volumes")
            .body(Body::from(encode_volume(&v, DataType::Float64)))
            .unwrap()
    };
    let (_, hf) = call(&app, upload(phantom(32, 0.3))).await;
    let hf: Value = serde_json::from_slice(&hf).unwrap();
    let (_, ulf) = call(&app, upload(phantom(32, 0.0))).await;
    let ulf: Value = serde_json::from_slice(&ulf).unwrap();
    println!("uploaded {} and {}", hf["volume_id"], ulf["volume_id"]);

    let mut params = DegradationParams::default();
    params.kspace.rho = 0.5;
    let degraded = post_json(
        &app,
        "/degrade",
        json!({ "volume_id": hf["volume_id"], "params": params, "seed": 3 }),
    )
    .await;
    let result_id = degraded["result_id"].as_str().unwrap().to_owned();
    println!(
        "band energy after degradation: {}",
        degraded["report"]["band_energy_post"]
    );
    let again = post_json(
        &app,
        "/degrade",
        json!({ "volume_id": hf["volume_id"], "params": params, "seed": 3 }),
    )
    .await;
    println!(
        "second identical request served from cache: {}",
        again["cache_hit"]
    );

    let png = get(&app, &format!("/results/{result_id}/slice?axis=z&index=16")).await;
    println!("slice PNG: {} bytes", png.len());

    post_json(
        &app,
        "/reference-spectrum",
        json!({ "volume_id": ulf["volume_id"], "bins": 16 }),
    )
    .await;
    let cmp: Value =
        serde_json::from_slice(&get(&app, &format!("/compare?result_id={result_id}")).await)
            .unwrap();
    println!("band deltas vs reference: {}", cmp["band_deltas"]);

    post_json(
        &app,
        "/presets",
        json!({ "name": "rho-half", "params": params, "notes": "demo" }),
    )
    .await;
    let toml = get(&app, "/presets/rho-half/export").await;
    println!("exported preset:\n{}", String::from_utf8_lossy(&toml));
}
