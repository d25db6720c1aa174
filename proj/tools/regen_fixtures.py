#!/usr/bin/env python3
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

"""Regenerates tests/fixtures through the real record path.

A scripted stand-in for the chat, image, embedding and knowledge APIs runs
on a local port; `metablend record` and `metablend serve` (record mode) are
pointed at it. Answers are authored, not sampled.

    python3 tools/regen_fixtures.py --bin build/metablend --out tests/fixtures
"""

import argparse
import base64
import hashlib
import json
import os
import re
import shutil
import subprocess
import sys
import tempfile
import threading
import time
import urllib.parse
import urllib.request
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np

# ---------------------------------------------------------------------------
# Authored answers

THEMES = {
    "global warming":
        "Global warming is slowly overheating the earth that all of us call home.",
    "Exercise fuels your body like vitamins":
        "Regular exercise nourishes and strengthens the body in the same way that vitamins sustain its health.",
    "Books are the mirror to the soul":
        "Reading reveals and reflects the inner self of a person.",
}

# Ordered pools; a request gets the first five names not excluded by its
# addendum. "running" is an activity and must be filtered by the client.
OBJECTS = {
    "global": [
        ("earth", "The earth is the whole planet, the place where every global change lands."),
        ("globe", "A globe is a small model of the entire world turning on its axis."),
        ("world map", "A world map lays out every country at once, just as global things span everywhere."),
        ("passport", "A passport opens borders and stands for moving across the globe."),
        ("satellite", "A satellite circles the planet and watches the whole world from above."),
        ("compass", "A compass points the way anywhere on the globe."),
        ("airplane", "An airplane links distant continents in a few hours."),
    ],
    "warming": [
        ("fireplace", "A fireplace gives off steady heat that warms everything around it."),
        ("thermometer", "A thermometer shows temperatures climbing as things warm up."),
        ("sun", "The sun pours heat onto the ground and warms the air."),
        ("radiator", "A radiator slowly raises the temperature of a room."),
        ("ice cube", "An ice cube melts away as the air around it warms."),
        ("kettle", "A kettle heats water until it boils."),
        ("heater", "A heater pushes warm air into a cold space."),
    ],
    "exercise": [
        ("running", "Running is a common way to exercise."),
        ("dumbbell", "Because they can be used for weightlifting exercises to enhance muscle strength."),
        ("running shoes", "Because they are suitable for running exercises to improve cardiovascular function."),
        ("yoga mat", "Because it offers a comfortable surface for balance and stretching exercises."),
        ("jump rope", "Because skipping rope is a quick cardio workout."),
        ("swimming goggles", "Because they protect the eyes and aid swimming exercises underwater."),
        ("kettlebell", "Because swinging it builds strength and endurance."),
        ("treadmill", "Because it lets people walk or jog indoors."),
        ("water bottle", "Because staying hydrated keeps a workout going."),
        ("bicycle", "Because riding it trains the legs and the heart."),
        ("stopwatch", "Because it times every lap and interval."),
        ("resistance band", "Because stretching it works the muscles."),
        ("tennis racket", "Because swinging it keeps a player moving."),
        ("basketball", "Because bouncing and shooting it is a full-body workout."),
        ("sweatband", "Because it soaks up the sweat of hard training."),
    ],
    "vitamins": [
        ("orange", "It contains vitamin C, which is essential for health and well-being."),
        ("medicine", "Medicine, like vitamins, is taken to keep the body healthy."),
        ("egg", "An egg is rich in vitamins D and B12 that feed the body."),
        ("carrot", "A carrot is full of vitamin A, good for the eyes."),
        ("fish", "Fish provides vitamin D and healthy oils."),
        ("spinach", "Spinach is packed with vitamins K and A."),
        ("milk", "Milk is fortified with vitamin D for strong bones."),
        ("banana", "A banana supplies vitamin B6 and energy."),
        ("lemon", "A lemon is a classic source of vitamin C."),
        ("almond", "An almond carries vitamin E."),
        ("pill bottle", "A pill bottle holds daily vitamin supplements."),
        ("strawberry", "A strawberry is loaded with vitamin C."),
    ],
    "books": [
        ("book", "A book holds stories and ideas between its covers."),
        ("bookshelf", "A bookshelf stores many books in rows."),
        ("library card", "A library card gives access to shelves of books."),
        ("reading lamp", "A reading lamp lights the pages of a book at night."),
        ("bookmark", "A bookmark keeps the reader's place in a book."),
        ("newspaper", "A newspaper is printed reading matter like a book."),
    ],
    "mirror": [
        ("hand mirror", "A hand mirror shows a reflection, just as a mirror does."),
        ("lake", "A still lake reflects the sky like a mirror."),
        ("window", "A window pane can reflect the viewer like a mirror."),
        ("spoon", "A polished spoon reflects a tiny upside-down image."),
        ("camera lens", "A camera lens captures an image of what stands before it."),
        ("puddle", "A puddle mirrors the street above it."),
    ],
    "soul": [
        ("phoenix", "A phoenix rises from its ashes, an image of the undying soul."),
        ("candle", "A candle flame is a small light like the inner soul."),
        ("dove", "A dove is often drawn as the soul taking flight."),
        ("heart", "A heart is where people say the soul lives."),
        ("butterfly", "A butterfly emerging from its cocoon stands for the soul."),
        ("lantern", "A lantern carries an inner light through the dark."),
    ],
}

ATTRIBUTES = {
    "earth": ["round", "blue oceans", "green continents", "white clouds", "rocky surface"],
    "globe": ["spherical", "printed map", "tilted axis", "metal stand", "glossy"],
    "world map": ["flat", "rectangular", "colorful countries", "grid lines", "paper"],
    "passport": ["small booklet", "dark blue cover", "gold emblem", "stamped pages", "photo page"],
    "satellite": ["solar panels", "metallic body", "antenna dish", "boxy", "reflective foil"],
    "compass": ["round dial", "magnetic needle", "glass cover", "brass case", "printed letters"],
    "airplane": ["long wings", "white fuselage", "tail fin", "jet engines", "small windows"],
    "fireplace": ["flames", "brick frame", "chimney", "burning logs", "glowing embers"],
    "thermometer": ["thin tube", "red liquid", "printed scale", "glass body", "bulb tip"],
    "sun": ["bright", "yellow", "glowing", "radiating rays", "circular"],
    "radiator": ["metal fins", "white paint", "ridged", "pipes", "rectangular panel"],
    "ice cube": ["transparent", "cubic", "melting", "frosty", "wet surface"],
    "kettle": ["spout", "handle", "shiny steel", "lid", "steam"],
    "heater": ["glowing coils", "metal grille", "boxy", "knobs", "power cord"],
    "ice cream": ["creamy", "cone", "scoops", "melting drips", "pastel"],
    "dumbbell": ["metal bar", "round weights", "knurled grip", "heavy", "black plates"],
    "running shoes": ["laces", "rubber sole", "mesh upper", "cushioned", "bright trim"],
    "yoga mat": ["rolled", "rubbery", "flat", "textured", "purple"],
    "jump rope": ["long cord", "plastic handles", "thin", "flexible", "looped"],
    "swimming goggles": ["tinted lenses", "elastic strap", "curved", "rubber seals", "nose bridge"],
    "kettlebell": ["cast iron", "looped handle", "ball-shaped", "heavy", "matte black"],
    "treadmill": ["moving belt", "handrails", "console screen", "long deck", "metal frame"],
    "water bottle": ["screw cap", "cylindrical", "transparent", "plastic", "measurement marks"],
    "bicycle": ["two wheels", "pedals", "chain", "handlebars", "saddle"],
    "stopwatch": ["round face", "push button", "digital display", "lanyard", "silver"],
    "orange": ["round", "orange color", "juicy", "dimpled peel", "segmented"],
    "medicine": ["small pills", "white tablets", "blister pack", "capsules", "glossy coating"],
    "egg": ["oval", "smooth shell", "white", "yolk", "fragile"],
    "carrot": ["long", "tapered", "orange", "leafy top", "crunchy"],
    "fish": ["scales", "fins", "silver", "gills", "streamlined"],
    "spinach": ["green leaves", "veined", "crinkled", "tender", "dark"],
    "milk": ["white", "liquid", "glass bottle", "creamy", "opaque"],
    "banana": ["curved", "yellow peel", "soft", "brown spots", "long"],
    "lemon": ["oval", "yellow", "waxy peel", "sour", "pointed ends"],
    "almond": ["teardrop", "brown skin", "ridged", "hard", "small"],
    "book": ["paper pages", "hardcover", "rectangular", "spine", "printed text"],
    "bookshelf": ["wooden", "tall", "rows of shelves", "crowded", "upright"],
    "library card": ["plastic", "barcode", "small", "printed name", "rectangular"],
    "reading lamp": ["curved neck", "warm light", "lamp shade", "metal base", "switch"],
    "bookmark": ["thin", "ribbon tassel", "paper", "narrow", "patterned"],
    "hand mirror": ["reflective glass", "oval frame", "handle", "silver backing", "polished"],
    "lake": ["still water", "reflective surface", "blue", "shoreline", "ripples"],
    "window": ["glass pane", "wooden frame", "transparent", "rectangular", "latch"],
    "spoon": ["curved bowl", "shiny", "long handle", "metal", "reflective"],
    "camera lens": ["round glass", "black barrel", "focus ring", "convex", "coated"],
    "phoenix": ["fiery wings", "red feathers", "long tail", "golden plumage", "sharp beak"],
    "candle": ["wax", "wick", "small flame", "cylindrical", "dripping"],
    "dove": ["white feathers", "spread wings", "small beak", "round body", "soft"],
    "heart": ["red", "rounded lobes", "pointed tip", "muscular", "symmetrical"],
    "butterfly": ["patterned wings", "antennae", "delicate", "colorful", "thin body"],
}

# First answer for these objects uses a generic class word; the retry fixes it.
ATTRIBUTE_FIRST_TRY = {
    "egg": ["oval", "smooth shell", "color", "yolk", "fragile"],
}

SCHEMES = {
    ("earth", "round", "fireplace", "flames"): [
        ("Wrap the round earth in curling flames so the planet burns like a log in a fireplace.",
         "Because the earth is round and the fireplace is defined by its flames, the globe can become the fuel."),
        ("Set a round earth inside a brick fireplace with flames rising from its continents.",
         "Because placing the earth where logs usually burn makes the heating of the planet literal."),
        ("Shape the flames of a fireplace into a round ball that carries the outline of the earth.",
         "Because fire that takes the earth's round form reads as a planet made of heat."),
    ],
    ("book", "paper pages", "hand mirror", "reflective glass"): [
        ("Replace the paper pages of an open book with sheets of reflective glass like a hand mirror.",
         "Because the pages of a book and the glass of a hand mirror are both flat surfaces people look into."),
        ("Fit a hand mirror's reflective glass into the cover of a book so the pages reflect the reader.",
         "Because both a book and a mirror show people something about themselves."),
        ("Make the handle of a hand mirror from rolled paper pages so the mirror grows out of a book.",
         "Because both objects are held close to the face while being read or looked into."),
    ],
}

KNOWLEDGE_OBJECTS = {
    "global": ["earth", "world", "globe", "planet", "map", "international", "satellite", "passport",
               "worldwide", "atlas"],
    "warming": ["heat", "fireplace", "sun", "thermometer", "climate", "fire", "radiator",
                "temperature", "blanket", "summer"],
    "exercise": ["running", "gym", "dumbbell", "yoga", "sport", "treadmill", "jump rope",
                 "fitness", "swimming", "workout"],
    "vitamins": ["vitamin c", "orange", "pill", "fruit", "health", "egg", "carrot", "supplement",
                 "nutrient", "medicine"],
    "books": ["book", "library", "page", "reading", "bookshelf", "novel", "author", "bookmark"],
    "mirror": ["reflection", "glass", "hand mirror", "lake", "image", "looking glass", "window"],
    "soul": ["spirit", "phoenix", "heart", "mind", "candle", "dove", "life", "butterfly"],
}

PNG_1x1 = base64.b64decode(
    "iVBORw0KGgoAAAANSUhEUgAAAAEAAAABCAYAAAAfFcSJAAAADUlEQVR42mNk+M9QDwADhgGAWjR9awAAAABJRU5ErkJggg==")

# ---------------------------------------------------------------------------
# Embeddings: seeded noise plus shared directions for pairs that should be
# close.

DIM = 16
CLUSTERS = [
    ({"earth", "fireplace"}, 3.0),
    ({"round", "flames"}, 3.0),
    ({"book", "hand mirror"}, 3.0),
    ({"hand mirror", "phoenix"}, 1.0),
]


def seeded(text):
    seed = int.from_bytes(hashlib.sha256(text.encode()).digest()[:8], "little")
    return np.random.default_rng(seed).normal(size=DIM)


def embedding(text):
    t = " ".join(text.lower().split())
    v = seeded(t)
    for i, (members, weight) in enumerate(CLUSTERS):
        if t in members:
            v = v + weight * seeded(f"cluster-{i}")
    return [round(float(x), 6) for x in v / np.linalg.norm(v)]


# ---------------------------------------------------------------------------
# Stand-in server

def excluded_names(addendum):
    m = re.search(r"already suggested or rejected: (.*)\.$", addendum or "")
    if not m:
        return set()
    return {n.strip().lower() for n in m.group(1).split(",")}


def wrap(payload, style):
    body = json.dumps({"result": payload}, indent=2, ensure_ascii=False)
    if style == "fenced":
        return "```json\n" + body + "\n```"
    if style == "prefixed":
        return "Sure, here is the result:\n" + body
    return body


def answer_chat(messages):
    prompt = messages[0]["content"]
    addendum = messages[1]["content"] if len(messages) > 1 else ""
    m = re.search(r"hidden meaning in the sentence \((.*?)\)\.", prompt)
    if m:
        return wrap(THEMES[m.group(1)], "fenced")
    m = re.search(r"The user input is (.*?)\.\n", prompt)
    if m and "identify multiple physical objects" in prompt:
        pool = OBJECTS[m.group(1).lower()]
        skip = excluded_names(addendum)
        rows = [[n, r] for n, r in pool if n not in skip][:5]
        return wrap(rows, "prefixed")
    if m and "visible physical attributes" in prompt:
        rows = []
        for name in m.group(1).split(", "):
            attrs = ATTRIBUTES[name]
            if not addendum and name in ATTRIBUTE_FIRST_TRY:
                attrs = ATTRIBUTE_FIRST_TRY[name]
            rows.append([name] + attrs)
        return wrap(rows, "plain")
    m = re.search(r"The first object is (.*?), the shared connecting attribute of .*? could be (.*?)\.\n"
                  r"\s*The second object is (.*?), the shared connecting attribute of .*? could be (.*?)\.\n",
                  prompt)
    if m:
        n = int(re.search(r"produce \((\d+)\) distinct", prompt).group(1))
        key = m.groups()
        a, x, b, y = key
        pool = SCHEMES.get(key) or [
            (f"Give the {a} the {y} of a {b} while keeping its {x}.",
             f"Because the {x} of the {a} and the {y} of the {b} can share one form."),
            (f"Build a {b} whose {y} is made from the {x} of a {a}.",
             f"Because the {a} lends its {x} to the {b}."),
            (f"Join half a {a} and half a {b} along the line where {x} meets {y}.",
             f"Because {x} and {y} sit side by side in one object."),
        ]
        return wrap([["<" + s + ">", "<" + r + ">"] for s, r in pool[:n]], "plain")
    raise KeyError("no authored answer for prompt: " + prompt[:200])


def knowledge(path, query):
    if path.startswith("/related/c/en/"):
        seed = urllib.parse.unquote(path[len("/related/c/en/"):]).replace("_", " ")
        terms = KNOWLEDGE_OBJECTS.get(seed, [])
        return {"related": [{"@id": "/c/en/" + t.replace(" ", "_"), "weight": round(0.9 - 0.05 * i, 3)}
                            for i, t in enumerate(terms)]}
    if path == "/query":
        seed = query["start"][0][len("/c/en/"):].replace("_", " ")
        rel = query["rel"][0][len("/r/"):]
        if rel == "HasProperty":
            terms = ATTRIBUTES.get(seed, [])
        elif rel == "RelatedTo":
            terms = KNOWLEDGE_OBJECTS.get(seed, [])[:3]
        else:
            terms = []
        return {"edges": [{"end": {"@id": "/c/en/" + t.replace(" ", "_"), "language": "en"},
                           "weight": round(2.0 - 0.1 * i, 3)} for i, t in enumerate(terms)]}
    return None


class Handler(BaseHTTPRequestHandler):
    def log_message(self, *args):
        pass

    def reply(self, status, obj):
        data = json.dumps(obj).encode()
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def do_GET(self):
        u = urllib.parse.urlparse(self.path)
        body = knowledge(u.path, urllib.parse.parse_qs(u.query))
        if body is None:
            self.reply(404, {"error": "not found"})
        else:
            self.reply(200, body)

    def do_POST(self):
        n = int(self.headers.get("Content-Length", "0"))
        req = json.loads(self.rfile.read(n) or b"{}")
        try:
            if self.path.endswith("/chat/completions"):
                text = answer_chat(req["messages"])
                self.reply(200, {"choices": [{"message": {"role": "assistant", "content": text}}]})
            elif self.path.endswith("/embeddings"):
                self.reply(200, {"data": [{"embedding": embedding(req["input"])}]})
            elif self.path.endswith("/images/generations"):
                self.reply(200, {"data": [{"b64_json": base64.b64encode(PNG_1x1).decode()}]})
            else:
                self.reply(404, {"error": "not found"})
        except KeyError as e:
            print("stand-in:", e, file=sys.stderr)
            self.reply(500, {"error": str(e)})


# ---------------------------------------------------------------------------
# Driver

def http(method, url, body=None):
    data = json.dumps(body).encode() if body is not None else None
    req = urllib.request.Request(url, data=data, method=method,
                                 headers={"Content-Type": "application/json"})
    with urllib.request.urlopen(req) as r:
        return json.loads(r.read())


def record_books(binary, config_path, fixtures, scratch):
    proc = subprocess.Popen([binary, "serve", "--config", config_path, "--port", "0",
                             "--data-dir", os.path.join(scratch, "books")],
                            stdout=subprocess.PIPE, text=True)
    try:
        line = proc.stdout.readline()
        base = re.search(r"(http://\S+)", line).group(1)
        s = http("POST", base + "/sessions", {"expression": "Books are the mirror to the soul"})
        sid = s["id"]
        picks = [i for i, t in enumerate(s["tokens"])
                 if t["surface"].lower() in ("books", "mirror", "soul")]
        http("POST", f"{base}/sessions/{sid}/concepts", {"indices": picks})
        http("POST", f"{base}/sessions/{sid}/theme")
        for c in ("books", "mirror", "soul"):
            http("POST", f"{base}/sessions/{sid}/concepts/{c}/objects", {"iteration": 1})
        choices = [
            {"concept": "soul", "object": "phoenix", "attribute": "fiery wings"},
            {"concept": "books", "object": "book", "attribute": "paper pages"},
            {"concept": "mirror", "object": "hand mirror", "attribute": "reflective glass"},
        ]
        plan = http("POST", f"{base}/sessions/{sid}/plan-multi", {"choices": choices})["plan"]
        http("POST", f"{base}/sessions/{sid}/schemes", {"pair": plan["primary"], "n": 3})
        http("POST", f"{base}/sessions/{sid}/prompts", {"plan": plan, "scheme_index": 0})
    finally:
        proc.terminate()
        proc.wait()


def robustness_records(fixtures):
    """Hand-written replay records for parser robustness checks."""
    out = os.path.join(fixtures, "robustness")
    os.makedirs(out, exist_ok=True)
    payload = json.dumps({"result": "Knowledge is a light that guides the way."})
    cases = {
        "fenced": ["```json\n" + payload + "\n```"],
        "prefixed": ["Here is the JSON you asked for: " + payload],
        "suffixed": [payload + "\nLet me know if you need anything else!"],
        "malformed": ["I am not able to answer in JSON, sorry.", "{\"result\": ", "result: nope"],
    }
    for name, responses in cases.items():
        rec = {"template_id": "theme", "bindings": {"Input": "robustness " + name},
               "addendum": "", "responses": responses, "parsed": None}
        with open(os.path.join(out, name + ".json"), "w") as f:
            json.dump(rec, f, indent=2)
            f.write("\n")


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--bin", default="build/metablend")
    ap.add_argument("--out", default="tests/fixtures")
    args = ap.parse_args()

    server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
    threading.Thread(target=server.serve_forever, daemon=True).start()
    base = f"http://127.0.0.1:{server.server_address[1]}"

    fixtures = os.path.abspath(args.out)
    for sub in ("oracle", "knowledge", "images", "robustness"):
        shutil.rmtree(os.path.join(fixtures, sub), ignore_errors=True)
    for f in ("embeddings.json", "sentiment.json"):
        if os.path.exists(os.path.join(fixtures, f)):
            os.remove(os.path.join(fixtures, f))
    os.makedirs(fixtures, exist_ok=True)

    scratch = tempfile.mkdtemp(prefix="metablend-regen-")
    config = {
        "mode": "record",
        "fixtures_dir": fixtures,
        "oracle_base_url": base + "/v1",
        "image_base_url": base + "/v1",
        "knowledge_base_url": base,
        "embedding_base_url": base + "/v1",
    }
    config_path = os.path.join(scratch, "config.json")
    with open(config_path, "w") as f:
        json.dump(config, f)

    runs = [
        ["--expression", "global warming", "--replace", "warming:fireplace:ice cream"],
        ["--expression", "Exercise fuels your body like vitamins", "--concepts", "exercise,vitamins",
         "--iterations", "2"],
    ]
    env = dict(os.environ)
    for k in ("ORACLE_API_KEY", "IMAGE_API_KEY", "KNOWLEDGE_BASE_URL", "CACHE_DIR"):
        env.pop(k, None)
    for i, extra in enumerate(runs):
        cmd = [args.bin, "record", "--config", config_path, "--fixtures", fixtures,
               "--out", os.path.join(scratch, f"run{i}")] + extra
        subprocess.run(cmd, check=True, env=env, stdout=subprocess.DEVNULL)
    record_books(args.bin, config_path, fixtures, scratch)
    lookups = [["exercise", "--limit", "3"], ["orange", "--attributes", "--limit", "10"],
               ["zzxqv-nonword", "--limit", "50"]]
    for extra in lookups:
        subprocess.run([args.bin, "lookup", "--record", "--config", config_path, "--fixtures",
                        fixtures] + extra, check=True, env=env, stdout=subprocess.DEVNULL)
    robustness_records(fixtures)

    # Offline playback uses the deterministic placeholder for images.
    shutil.rmtree(os.path.join(fixtures, "images"), ignore_errors=True)
    server.shutdown()
    shutil.rmtree(scratch, ignore_errors=True)
    print("fixtures written to", fixtures)


if __name__ == "__main__":
    main()
