# Copyright 2026 The Metablend Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Validates live server bodies and CLI outputs against docs/schemas."""

import argparse
import json
import os
import re
import subprocess
import sys
import tempfile
import time
import urllib.error
import urllib.request

import jsonschema
from referencing import Registry, Resource

BASE_ID = "https://metablend.dev/schemas/"


def load_registry(schema_dir):
    resources = []
    for name in sorted(os.listdir(schema_dir)):
        if name.endswith(".schema.json"):
            with open(os.path.join(schema_dir, name)) as f:
                doc = json.load(f)
            resources.append((doc["$id"], Resource.from_contents(doc)))
    return Registry().with_resources(resources)


class Checker:
    def __init__(self, registry):
        self.registry = registry
        self.failures = 0
        self.checked = 0

    def check(self, label, ref, body):
        schema = {"$ref": BASE_ID + ref}
        v = jsonschema.Draft202012Validator(schema, registry=self.registry)
        errors = sorted(v.iter_errors(body), key=lambda e: list(e.path))
        self.checked += 1
        if errors:
            self.failures += 1
            print(f"FAIL {label} ({ref})")
            for e in errors[:5]:
                print("    at", "/".join(map(str, e.path)) or "<root>", ":", e.message[:200])
        else:
            print(f"ok   {label}")


class Server:
    def __init__(self, binary, fixtures):
        self.data = tempfile.mkdtemp(prefix="metablend-schema-")
        self.proc = subprocess.Popen(
            [binary, "serve", "--offline", "--port", "0", "--fixtures", fixtures,
             "--data-dir", self.data],
            stdout=subprocess.PIPE, text=True)
        line = self.proc.stdout.readline()
        self.base = re.search(r"(http://\S+)", line).group(1)

    def call(self, method, path, body=None):
        data = None if body is None else json.dumps(body).encode()
        req = urllib.request.Request(self.base + path, method=method, data=data,
                                     headers={"Content-Type": "application/json"})
        try:
            with urllib.request.urlopen(req, timeout=30) as r:
                return r.status, json.loads(r.read())
        except urllib.error.HTTPError as e:
            return e.code, json.loads(e.read())

    def close(self):
        self.proc.terminate()
        self.proc.wait()


def expect(c, label, ref, status, want, body):
    if status != want:
        c.failures += 1
        print(f"FAIL {label}: status {status}, want {want}: {json.dumps(body)[:300]}")
        return
    c.check(label, ref, body)


def api_two_concepts(c, srv):
    api = "api.schema.json#/$defs/"
    st, s = srv.call("POST", "/sessions", {"expression": "global warming"})
    expect(c, "POST /sessions", api + "CreateSessionResponse", st, 201, s)
    sid = "/sessions/" + s["id"]
    st, b = srv.call("POST", sid + "/concepts", {"indices": [0, 1]})
    expect(c, "POST concepts", api + "SelectConceptsResponse", st, 200, b)
    st, b = srv.call("POST", sid + "/theme", {})
    expect(c, "POST theme", api + "ThemeResponse", st, 200, b)
    for concept in ("global", "warming"):
        st, b = srv.call("POST", f"{sid}/concepts/{concept}/objects", {"iteration": 1})
        expect(c, f"POST objects ({concept})", api + "SuggestObjectsResponse", st, 200, b)
    st, b = srv.call("POST", sid + "/objects/attributes", {"names": ["earth"]})
    expect(c, "POST objects/attributes", api + "AttributesResponse", st, 200, b)
    st, b = srv.call("POST", sid + "/objects/preview", {"name": "earth"})
    expect(c, "POST objects/preview", api + "PreviewResponse", st, 200, b)
    st, b = srv.call("GET", sid + "/analysis/objects")
    expect(c, "GET analysis/objects", api + "AnalysisResponse", st, 200, b)
    st, b = srv.call("GET", sid + "/analysis/attributes?pair=earth,fireplace")
    expect(c, "GET analysis/attributes", api + "AnalysisResponse", st, 200, b)
    pair = {"object_a": "earth", "attribute_a": "round",
            "object_b": "fireplace", "attribute_b": "flames"}
    c.check("SchemesRequest", api + "SchemesRequest", {"pair": pair, "n": 3})
    st, b = srv.call("POST", sid + "/schemes", {"pair": pair, "n": 3})
    expect(c, "POST schemes", api + "SchemesResponse", st, 200, b)
    st, p = srv.call("POST", sid + "/prompts", {"pair": pair, "scheme_index": 0})
    expect(c, "POST prompts", api + "PromptsResponse", st, 200, p)
    st, b = srv.call("POST", sid + "/images", {"prompt_id": p["id"]})
    expect(c, "POST images", api + "ImagesResponse", st, 200, b)
    st, acc = srv.call("POST", sid + "/images?async=1", {"prompt_id": p["id"]})
    expect(c, "POST images?async=1", api + "ImagesAccepted", st, 202, acc)
    job = {"status": "pending"}
    for _ in range(200):
        st, job = srv.call("GET", acc["status_url"])
        if job.get("status") != "pending":
            break
        time.sleep(0.02)
    expect(c, "GET jobs/{id}", api + "JobResponse", st, 200, job)
    st, b = srv.call("GET", sid + "/canvas")
    expect(c, "GET canvas", api + "CanvasResponse", st, 200, b)
    st, b = srv.call("GET", sid + "/history")
    expect(c, "GET history", api + "HistoryResponse", st, 200, b)
    st, b = srv.call("GET", sid)
    expect(c, "GET session", api + "SessionResponse", st, 200, b)
    st, b = srv.call("POST", sid + "/objects/replace",
                     {"concept": "warming", "old": "fireplace", "new": "ice cream"})
    expect(c, "POST objects/replace", api + "ReplaceResponse", st, 200, b)
    st, b = srv.call("POST", "/sessions", {"expression": "  "})
    expect(c, "POST /sessions blank", api + "ErrorResponse", st, 400, b)
    st, b = srv.call("POST", sid + "/images", {"prompt_id": "p-000000000000"})
    expect(c, "POST images unknown prompt", api + "ErrorResponse", st, 404, b)


def api_multi(c, srv):
    api = "api.schema.json#/$defs/"
    st, s = srv.call("POST", "/sessions", {"expression": "Books are the mirror to the soul"})
    sid = "/sessions/" + s["id"]
    picks = [i for i, t in enumerate(s["tokens"])
             if t["surface"].lower() in ("books", "mirror", "soul")]
    srv.call("POST", sid + "/concepts", {"indices": picks})
    srv.call("POST", sid + "/theme", {})
    for concept in ("books", "mirror", "soul"):
        srv.call("POST", f"{sid}/concepts/{concept}/objects", {"iteration": 1})
    choices = [
        {"concept": "soul", "object": "phoenix", "attribute": "fiery wings"},
        {"concept": "books", "object": "book", "attribute": "paper pages"},
        {"concept": "mirror", "object": "hand mirror", "attribute": "reflective glass"},
    ]
    c.check("PlanMultiRequest", api + "PlanMultiRequest", {"choices": choices})
    st, b = srv.call("POST", sid + "/plan-multi", {"choices": choices})
    expect(c, "POST plan-multi", api + "PlanMultiResponse", st, 200, b)
    plan = b["plan"]
    srv.call("POST", sid + "/schemes", {"pair": plan["primary"], "n": 3})
    c.check("PromptsRequest (plan)", api + "PromptsRequest", {"plan": plan, "scheme_index": 0})
    st, b = srv.call("POST", sid + "/prompts", {"plan": plan, "scheme_index": 0})
    expect(c, "POST prompts (plan)", api + "PromptsResponse", st, 200, b)


def cli_outputs(c, binary, fixtures, golden):
    out = tempfile.mkdtemp(prefix="metablend-schema-run-")
    subprocess.run([binary, "run", "--expression", "global warming", "--auto", "--offline",
                    "--fixtures", fixtures, "--out", out], check=True, stdout=subprocess.DEVNULL)
    for rel, ref in (("session.json", "session.schema.json"),
                     ("diagrams/objects.json", "diagram.schema.json"),
                     ("diagrams/attributes.json", "diagram.schema.json")):
        with open(os.path.join(out, rel)) as f:
            c.check("run output " + rel, ref, json.load(f))
    with open(os.path.join(golden, "session-global-warming.json")) as f:
        c.check("golden session", "session.schema.json", json.load(f))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--bin", required=True)
    ap.add_argument("--schemas", required=True)
    ap.add_argument("--fixtures", required=True)
    ap.add_argument("--golden", required=True)
    args = ap.parse_args()

    c = Checker(load_registry(args.schemas))
    srv = Server(args.bin, args.fixtures)
    try:
        api_two_concepts(c, srv)
        api_multi(c, srv)
    finally:
        srv.close()
    cli_outputs(c, args.bin, args.fixtures, args.golden)
    print(f"{c.checked - c.failures}/{c.checked} bodies valid")
    return 1 if c.failures else 0


if __name__ == "__main__":
    sys.exit(main())
