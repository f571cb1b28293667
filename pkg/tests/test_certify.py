import json
import subprocess
import sys
from fractions import Fraction

import pytest

from densramsey.certify import make_certificate, require_valid, verify_certificate
from densramsey.errors import MalformedInput, VerificationFailed
from densramsey.fw_search import fw_extract
from densramsey.io import digest, dumps, loads, parse_rational, to_jsonable
from densramsey.tree_core import TreeParams, TreeSubset

SEARCH_MODULES = ["fw_search", "grid_extraction", "convolution"]


def fw_cert():
    A = TreeSubset.full(TreeParams(2, 4))
    cert = fw_extract(A, 2)
    payload = {"mode": "extract", "k": 2, "delta": None, **cert.to_dict()}
    return make_certificate("fw", {"tree": A.to_dict()}, to_jsonable(payload))


def test_parse_rational():
    assert parse_rational("3/6") == Fraction(1, 2)
    assert parse_rational("4") == 4
    assert parse_rational(2) == 2
    for bad in ("0.5", "1/0", "a/b", 0.5, True):
        with pytest.raises(MalformedInput):
            parse_rational(bad)


def test_canonical_json():
    text = dumps({"b": Fraction(1, 3), "a": (1, 2)})
    assert text == '{\n  "a": [\n    1,\n    2\n  ],\n  "b": "1/3"\n}\n'
    assert loads(text) == {"a": [1, 2], "b": "1/3"}
    with pytest.raises(MalformedInput, match=r"x\.json:1:"):
        loads("{,}", "x.json")


def test_certificate_layout():
    cert = fw_cert()
    assert set(cert) == {"kind", "inputs", "inputs_digest", "payload", "tool_version"}
    assert cert["inputs_digest"] == digest(dumps(cert["inputs"]))
    assert verify_certificate(cert) == []
    require_valid(cert)


def test_supplied_inputs_must_match():
    cert = fw_cert()
    other = {"tree": TreeSubset.from_nodes(TreeParams(2, 4), [()]).to_dict()}
    assert any("digest" in p for p in verify_certificate(cert, other))
    with pytest.raises(VerificationFailed):
        require_valid(cert, other)


def test_missing_fields_are_malformed():
    cert = fw_cert()
    del cert["payload"]["subtree"]
    with pytest.raises(MalformedInput):
        verify_certificate(cert)
    with pytest.raises(MalformedInput):
        verify_certificate({"kind": "nope"})


def test_subtree_outside_set_rejected():
    cert = fw_cert()
    A = TreeSubset.from_nodes(TreeParams(2, 4), [(), (1,)])
    cert["inputs"] = {"tree": A.to_dict()}
    cert["inputs_digest"] = digest(dumps(cert["inputs"]))
    assert verify_certificate(cert)


def test_verifier_runs_without_search_modules(tmp_path):
    path = tmp_path / "cert.json"
    path.write_text(json.dumps(fw_cert()))
    blocked = "; ".join(f"sys.modules['densramsey.{m}'] = None" for m in SEARCH_MODULES)
    code = (f"import sys; {blocked}\n"
            "import json\n"
            "from densramsey.certify import verify_certificate\n"
            f"print(verify_certificate(json.load(open({str(path)!r}))))\n")
    proc = subprocess.run([sys.executable, "-c", code], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert proc.stdout.strip() == "[]"
