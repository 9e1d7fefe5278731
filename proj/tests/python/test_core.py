import pathlib

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import compsearch as cs

ROOT = pathlib.Path(__file__).resolve().parents[2]
DEMO = ROOT / "data" / "demo"


def unit_rows(rng, n, d):
    x = rng.normal(size=(n, d))
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def test_normalize_and_distance():
    rng = np.random.default_rng(0)
    for _ in range(100):
        v = rng.normal(size=8) * rng.uniform(1e-3, 1e3)
        u = cs.normalize(v)
        assert np.isclose(np.linalg.norm(u), 1.0, atol=1e-12)
        assert np.allclose(cs.normalize(u), u, atol=1e-12)
        assert np.isclose(cs.cosine_distance(v, -v), 2.0, atol=1e-12)
        assert np.isclose(cs.cosine_distance(v, 3.0 * v), 0.0, atol=1e-12)
    with pytest.raises(cs.Error):
        cs.normalize(np.zeros(4))


def test_search_matches_numpy_sort():
    rng = np.random.default_rng(1)
    for _ in range(20):
        n, d = rng.integers(5, 200), rng.integers(2, 16)
        rows = unit_rows(rng, n, d)
        rows[rng.integers(n)] = rows[0]  # force a tie
        ids = [f"id{i:04d}" for i in rng.permutation(n)]
        index = cs.Index(ids, rows)
        query = rows[0]
        k = int(rng.integers(1, n + 1))
        got = index.search(query, k)
        scores = np.clip(rows @ query, -1, 1)
        order = sorted(range(n), key=lambda i: (-scores[i], ids[i]))[:k]
        assert [g[0] for g in got] == [ids[i] for i in order]
        assert np.allclose([g[1] for g in got], scores[order], atol=1e-12)
    assert index.size == n and index.dim == d


def test_recall_at_k():
    assert cs.recall_at_k([["a", "b"], ["c", "d"]], ["b", "x"], 2) == 0.5
    assert cs.recall_at_k([["a", "b"]], ["b"], 1) == 0.0


def test_query_text():
    assert cs.build_query_text("blue", "red") == "replace blue with red"
    assert cs.parse_query_text("replace natural with black") == ("natural", "black")
    assert cs.parse_query_text("make it black") is None
    with pytest.raises(cs.Error, match="EmptyAttribute"):
        cs.build_query_text("", "red")


def test_parser_transcripts():
    lc = cs.parse_llm_output(
        "Thought: Do I need to use a tool? Yes\nAction: Multimodal search\nAction Input: IMG_001.png;natural;black",
        cs.SyntaxMode.LANGCHAIN,
    )
    assert lc["action"] == ("Multimodal search", ["IMG_001.png", "natural", "black"])
    fc = cs.parse_llm_output("Thought: the tee is natural.\nAction: SEARCH(IMG_001.png;natural;black)",
                             cs.SyntaxMode.FUNCTION_CALL)
    assert fc["action"] == ("SEARCH", ["IMG_001.png", "natural", "black"])
    assert fc["thought"] == "the tee is natural."
    with pytest.raises(cs.ParseError):
        cs.parse_llm_output(
            "Thought: Do I need to use a tool? Yes\nAction: Multimodal altering search\n"
            "Action Input: image_file: IMG_001.png, attribute value of the product in the image: chair, "
            "desired attribute value: sofa",
            cs.SyntaxMode.LANGCHAIN,
        )


arg_text = st.text(alphabet="abcdefghijklmnopqrstuvwxyz0123456789 .-_", min_size=1, max_size=12).map(str.strip).filter(bool)


@settings(max_examples=300, deadline=None)
@given(name=st.from_regex(r"[A-Za-z_][A-Za-z0-9_]{0,10}", fullmatch=True), args=st.lists(arg_text, max_size=4))
def test_function_call_round_trip(name, args):
    text = cs.format_tool_call(name, args, cs.SyntaxMode.FUNCTION_CALL)
    assert cs.parse_llm_output(text, cs.SyntaxMode.FUNCTION_CALL)["action"] == (name, args)


@settings(max_examples=300, deadline=None)
@given(text=st.text(max_size=80))
def test_parser_raises_only_parse_errors(text):
    for mode in (cs.SyntaxMode.FUNCTION_CALL, cs.SyntaxMode.LANGCHAIN):
        try:
            out = cs.parse_llm_output(text, mode)
        except cs.ParseError:
            continue
        assert (out["action"] is None) != (out["final_reply"] is None)


def test_token_estimate():
    assert cs.estimate_tokens("a b c") == 4
    assert cs.estimate_tokens("") == 0


def test_scripted_chat(tmp_path):
    report = cs.run_scripted_chat(DEMO / "beige_dress_chat.jsonl", DEMO / "gallery.jsonl", data_dir=tmp_path)
    assert report["passed"], report["output"]
    assert "[Action: SEARCH(IMG_001.png;gray;beige)]" in report["output"]
    assert (tmp_path / report["session_id"] / "IMG_001.png").exists()


def test_train_toy_smoke():
    history = cs.train_toy("epochs = 2\nmemory_capacity = 512\nlearning_rate = 1e-3\nwarmup_steps = 100\n", seed=3)
    assert [h["epoch"] for h in history] == [1, 2]
    assert all(np.isfinite(h["total"]) for h in history)
    assert 0.0 <= history[-1]["r_at_10"] <= 1.0
