import json
import os
import pathlib
import socket
import subprocess
import time

import jsonschema
import pytest
import requests

ROOT = pathlib.Path(__file__).resolve().parents[2]
DEMO = ROOT / "data" / "demo"
SCHEMA = json.loads((ROOT / "schemas" / "http_api.schema.json").read_text())
CLI = os.environ.get("COMPSEARCH_CLI")

pytestmark = pytest.mark.skipif(not CLI, reason="COMPSEARCH_CLI is not set")


def validate(body, name):
    jsonschema.validate(body, {"$ref": f"#/$defs/{name}", "$defs": SCHEMA["$defs"]})


def free_port():
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


@pytest.fixture()
def server(tmp_path):
    script = tmp_path / "llm.jsonl"
    script.write_text(
        json.dumps({"match": "beige", "response": "Thought: the dress is gray.\nSEARCH(IMG_001.png;gray;beige)"})
        + "\n"
        + json.dumps({"match": "what", "response": "VQA(IMG_001.png;what material is it?)"})
        + "\n"
    )
    vqa = tmp_path / "vqa.jsonl"
    vqa.write_text(json.dumps({"question": "what material is it?", "answer": "wool"}) + "\n")
    port = free_port()
    config = tmp_path / "server.conf"
    config.write_text(
        f"port = {port}\ndata_dir = {tmp_path / 'data'}\ngallery = {DEMO / 'gallery.jsonl'}\n"
        f"llm_script = {script}\nvqa_script = {vqa}\nk = 4\n"
    )
    env = {k: v for k, v in os.environ.items() if not k.startswith("COMPSEARCH_")}
    proc = subprocess.Popen([CLI, "serve", "--config", str(config)], env=env, stdout=subprocess.PIPE, text=True)
    base = f"http://127.0.0.1:{port}"
    for _ in range(100):
        try:
            requests.get(base + "/health", timeout=1)
            break
        except requests.ConnectionError:
            time.sleep(0.05)
    yield base, tmp_path / "data"
    proc.terminate()
    proc.wait(timeout=10)


def test_routes_follow_schemas(server):
    base, data_dir = server
    health = requests.get(base + "/health").json()
    validate(health, "health")
    assert health["gallery_size"] == 36

    created = requests.post(base + "/sessions")
    assert created.status_code == 201
    validate(created.json(), "session_created")
    sid = created.json()["session_id"]

    png = (DEMO / "images" / "gray-wool-dress.png").read_bytes()
    up = requests.post(f"{base}/sessions/{sid}/images", files={"image": ("dress.png", png, "image/png")})
    assert up.status_code == 200
    validate(up.json(), "upload")
    assert up.json()["initial_results"][0]["id"] == "gray-wool-dress"
    assert requests.get(base + up.json()["image_url"]).content == png
    assert requests.get(base + up.json()["initial_results"][0]["image_url"]).content == png

    turn = requests.post(f"{base}/sessions/{sid}/messages?debug=true", json={"text": "beige please"})
    assert turn.status_code == 200
    validate(turn.json(), "assistant_turn")
    assert turn.json()["tool_trace"] == {"tool": "SEARCH", "args": ["IMG_001.png", "gray", "beige"]}
    assert turn.json()["results"][0]["id"] == "beige-wool-dress"

    plain = requests.post(f"{base}/sessions/{sid}/messages", json={"text": "what is it made of?"})
    validate(plain.json(), "assistant_turn")
    assert "thought" not in plain.json()
    assert plain.json()["reply"] == "The answer is: wool."

    results = requests.get(f"{base}/sessions/{sid}/results").json()
    validate(results, "session_results")
    transcript = requests.get(f"{base}/sessions/{sid}/transcript").json()
    validate(transcript, "transcript")
    texts = [line["text"] for line in transcript["lines"]]
    assert "VQA(what material is it?) = wool" in texts

    saved = json.loads((data_dir / sid / "session.json").read_text())
    assert [m["text"] for m in saved["memory"]] == texts


def test_error_statuses(server):
    base, _ = server
    missing = requests.post(base + "/sessions/aaaaaaaaaaaaaaaaaaaaaaaaaa/messages", json={"text": "x"})
    assert missing.status_code == 404
    validate(missing.json(), "error")
    sid = requests.post(base + "/sessions").json()["session_id"]
    bad = requests.post(f"{base}/sessions/{sid}/messages", data="{oops", headers={"Content-Type": "application/json"})
    assert bad.status_code == 400
    validate(bad.json(), "error")
    offline = requests.post(f"{base}/sessions/{sid}/messages", json={"text": "nothing scripted for this"})
    assert offline.status_code == 503
    big = requests.post(
        f"{base}/sessions/{sid}/images", files={"image": ("big.png", b"x" * (10 * 1024 * 1024 + 1), "image/png")}
    )
    assert big.status_code == 413
