mod common;

use std::sync::Arc;

use common::*;
use memorypod::narrative::{template_summary, Generator, HttpChatClient, Summary, SummarizerBackend};
use memorypod::pod::codec::{encode_pod, encode_unchecked, EncodeOptions};
use memorypod::pod::AnnotationKind;
use memorypod::replay::{open_session, FrameState, ReplayMode};
use memorypod::Timestamp;
use memorypod_server::views::{keyframe_views, KeyframeView};
use memorypod_server::PodStore;
use serde_json::Value;

#[tokio::test]
async fn upload_list_download() {
    let server = start().await;
    let pod = simulated(1);
    let bytes = encode_pod(&pod).unwrap();
    let id = upload(&server, &pod).await;
    let http = reqwest::Client::new();

    let list: Value = http.get(format!("{}/pods", server.base)).send().await.unwrap().json().await.unwrap();
    assert_eq!(list[0]["pod_id"], id.as_str());
    assert_eq!(list[0]["annotation_count"], 5);

    let file = http.get(format!("{}/pods/{id}/file", server.base)).send().await.unwrap().bytes().await.unwrap();
    assert_eq!(file.as_ref(), bytes.as_slice());

    let info: Value = http.get(format!("{}/pods/{id}", server.base)).send().await.unwrap().json().await.unwrap();
    assert_eq!(info["title"], "Hard drive replacement");
    assert_eq!(info["process_duration_us"], 85_000_000);

    let kf: Vec<KeyframeView> = http.get(format!("{}/pods/{id}/keyframes", server.base)).send().await.unwrap().json().await.unwrap();
    assert_eq!(kf, keyframe_views(&pod));
    assert_eq!(kf.iter().map(|k| k.kind).collect::<Vec<_>>()[1], AnnotationKind::Acquire);

    let zones: Value = http.get(format!("{}/pods/{id}/zones", server.base)).send().await.unwrap().json().await.unwrap();
    assert_eq!(zones.as_array().unwrap().len(), 4);

    let mesh: Value = http.get(format!("{}/pods/{id}/mesh", server.base)).send().await.unwrap().json().await.unwrap();
    assert_eq!(mesh["triangles"].as_array().unwrap().len(), 2);

    let frame: FrameState =
        http.get(format!("{}/pods/{id}/frame?t_us=40000000", server.base)).send().await.unwrap().json().await.unwrap();
    let local = open_session(pod.clone(), ReplayMode::real(pod.anchor)).unwrap();
    assert_eq!(frame, local.frame_at(Timestamp(40_000_000)).unwrap());

    let mini: FrameState = http
        .get(format!("{}/pods/{id}/frame?t_us=40000000&mode=mini&scale=0.1&placement=0,0.8,-0.5", server.base))
        .send()
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    assert_eq!(mini.t, Timestamp(40_000_000));
    assert_ne!(mini, frame);

    let bad = http.get(format!("{}/pods/{id}/frame?t_us=999000000", server.base)).send().await.unwrap();
    assert_eq!(bad.status(), 400);
    let bad = http.get(format!("{}/pods/{id}/frame?t_us=0&mode=mini&scale=3", server.base)).send().await.unwrap();
    assert_eq!(bad.status(), 400);
}

#[tokio::test]
async fn upload_errors() {
    let server = start().await;
    let http = reqwest::Client::new();
    let post = |body: Vec<u8>| http.post(format!("{}/pods", server.base)).body(body).send();

    let resp = post(b"definitely not a pod".to_vec()).await.unwrap();
    assert_eq!(resp.status(), 400);
    assert_eq!(resp.json::<Value>().await.unwrap()["error"], "bad_magic");

    let bytes = encode_pod(&simulated(2)).unwrap();
    let resp = post(bytes[..bytes.len() / 2].to_vec()).await.unwrap();
    assert_eq!(resp.status(), 400);

    let mut broken = simulated(2);
    broken.annotations.retain(|a| a.kind != AnnotationKind::End);
    let resp = post(encode_unchecked(&broken, &EncodeOptions::default()).unwrap()).await.unwrap();
    assert_eq!(resp.status(), 422);
    let body: Value = resp.json().await.unwrap();
    assert!(body["report"]["violations"].as_array().unwrap().iter().any(|v| v["code"] == "MissingEnd"));

    assert!(http.get(format!("{}/pods", server.base)).send().await.unwrap().json::<Value>().await.unwrap().as_array().unwrap().is_empty());
    let resp = http.get(format!("{}/pods/nope", server.base)).send().await.unwrap();
    assert_eq!(resp.status(), 404);
    assert_eq!(http.get(format!("{}/pods/nope/file", server.base)).send().await.unwrap().status(), 404);
}

#[tokio::test]
async fn summaries_are_cached() {
    let server = start().await;
    let pod = simulated(3);
    let id = upload(&server, &pod).await;
    let url = format!("{}/pods/{id}/summary", server.base);
    let first: Summary = reqwest::get(&url).await.unwrap().json().await.unwrap();
    assert_eq!(first, template_summary(&pod));
    assert!(server.dir.path().join("pods").join(&id).join("summary.json").exists());
    let again = reqwest::get(&url).await.unwrap().text().await.unwrap();
    let refreshed = reqwest::get(format!("{url}?refresh=1")).await.unwrap().text().await.unwrap();
    assert_eq!(again, refreshed);
}

#[tokio::test]
async fn unreachable_model_falls_back() {
    let dead = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap();
    let client = HttpChatClient::from_env(format!("http://{dead}/v1/chat/completions"), "offline").with_token(None);
    let server = start_with(SummarizerBackend::Remote(Arc::new(client)), 20.0).await;
    let id = upload(&server, &simulated(4)).await;
    let s: Summary = reqwest::get(format!("{}/pods/{id}/summary", server.base)).await.unwrap().json().await.unwrap();
    assert_eq!(s.generator, Generator::Template);
    assert_eq!(s.warnings.len(), 1);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_uploads_all_land() {
    let server = start().await;
    let uploads = (0..8).map(|seed| {
        let base = server.base.clone();
        tokio::spawn(async move {
            let bytes = encode_pod(&simulated(seed)).unwrap();
            reqwest::Client::new().post(format!("{base}/pods")).body(bytes).send().await.unwrap().status()
        })
    });
    for u in uploads {
        assert_eq!(u.await.unwrap(), 201);
    }
    assert_eq!(server.store.manifest().pods.len(), 8);
    let reopened = PodStore::open(server.dir.path()).unwrap();
    assert_eq!(*reopened.manifest(), *server.store.manifest());
}
