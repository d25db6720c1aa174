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

"""Renders tests/golden/*.txt from resources/templates with Python's own
str.format, independent of the C++ renderer. Run once; the outputs are
checked in.

    python3 tools/gen_goldens.py
"""

import ast
import json
import os

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
TEMPLATES = os.path.join(ROOT, "resources", "templates")
GOLDEN = os.path.join(ROOT, "tests", "golden")

CHAT = {
    "theme": {"Input": "Knowledge guides the hope of our life"},
    "objects": {"INPUT": "exercise", "Related_Concepts": "running, gym, dumbbell, yoga, sport"},
    "attributes": {"INPUT": "orange, dumbbell",
                   "Related_Concepts": "orange: round, juicy, citrus; dumbbell: heavy, metal"},
    "schemes": {"Object A": "orange", "Attribute 1": "round", "Object B": "dumbbell",
                "Attribute 2": "circular plates", "NUM": "3"},
}

IMAGE = {
    "Object A": "earth", "Object B": "fireplace", "Attribute 1": "round", "Attribute 2": "flames",
    "selectedScheme": "Wrap the round earth in curling flames so the planet burns like a log in a fireplace.",
    "METAPHORICAL THEME": "Global warming is slowly overheating the earth that all of us call home",
}

MULTI = {
    "Object A": "book", "Object B": "hand mirror", "Attribute 1": "paper pages",
    "Attribute 2": "reflective glass",
    "selectedScheme": "Replace the paper pages of an open book with sheets of reflective glass like a hand mirror.",
    "METAPHORICAL THEME": "Reading reveals and reflects the inner self of a person",
    "secondary": [("soul", "phoenix")],
}


def read(name):
    with open(os.path.join(TEMPLATES, name + ".txt"), encoding="utf-8") as f:
        return f.read()


def render_chat(name, bindings):
    text = read(name)
    if "NUM" in bindings:
        text = text.replace("(NUM)", "(" + bindings["NUM"] + ")")
    return text.format_map({k: v for k, v in bindings.items() if k != "NUM"})


def image_segments(bindings):
    # The source is a Python expression; bare {name} parses as a set literal.
    source = read("image").strip()
    tree = ast.parse(source, mode="eval").body
    parts = []

    def walk(node):
        if isinstance(node, ast.BinOp):
            walk(node.left)
            walk(node.right)
        elif isinstance(node, ast.Constant):
            parts.append(node.value.format_map(bindings))
        elif isinstance(node, ast.Set):
            parts.append(bindings[node.elts[0].id])
        else:
            raise ValueError(ast.dump(node))

    walk(tree)
    return parts


def article(word):
    return "an" if word[:1].lower() in "aeiou" else "a"


def main():
    os.makedirs(GOLDEN, exist_ok=True)
    for name, bindings in CHAT.items():
        with open(os.path.join(GOLDEN, name + ".txt"), "w", encoding="utf-8") as f:
            f.write(render_chat(name, bindings))
    with open(os.path.join(GOLDEN, "image.txt"), "w", encoding="utf-8") as f:
        f.write(" ".join(image_segments(IMAGE)))
    segs = image_segments(MULTI)
    extra = [f"Include {article(obj)} {obj} as a secondary element representing {concept}."
             for concept, obj in MULTI["secondary"]]
    with open(os.path.join(GOLDEN, "multi.txt"), "w", encoding="utf-8") as f:
        f.write(" ".join(segs[:-1] + extra + segs[-1:]))
    with open(os.path.join(GOLDEN, "bindings.json"), "w", encoding="utf-8") as f:
        json.dump({"chat": CHAT, "image": IMAGE,
                   "multi": {k: v for k, v in MULTI.items() if k != "secondary"}},
                  f, indent=2, sort_keys=True)
        f.write("\n")


if __name__ == "__main__":
    main()
