#!/usr/bin/env python3
"""Recount element, tag and attribute features of one HTML page with the
standard library parser and compare them with a row of features.csv."""

import csv
import json
import sys
from html.parser import HTMLParser

VOID = {"area", "base", "br", "col", "embed", "hr", "img", "input", "link",
        "meta", "param", "source", "track", "wbr"}


class Counter(HTMLParser):
    def __init__(self, tags, attrs):
        super().__init__(convert_charrefs=True)
        self.known_tags = set(tags)
        self.known_attrs = set(attrs)
        self.counts = {}
        self.elements = 0
        self.stack = []
        self.depth = 0

    def bump(self, key):
        self.counts[key] = self.counts.get(key, 0) + 1

    def handle_starttag(self, tag, attrs):
        self.elements += 1
        self.bump("tag." + (tag if tag in self.known_tags else "__other__"))
        for name, _ in attrs:
            self.bump("attr." + (name if name in self.known_attrs else "__other__"))
        self.depth = max(self.depth, len(self.stack) + 1)
        if tag not in VOID:
            self.stack.append(tag)

    def handle_startendtag(self, tag, attrs):
        self.handle_starttag(tag, attrs)
        if tag not in VOID and self.stack and self.stack[-1] == tag:
            self.stack.pop()

    def handle_endtag(self, tag):
        if tag in self.stack:
            while self.stack and self.stack.pop() != tag:
                pass


def main():
    if len(sys.argv) != 4:
        print("usage: recount_features.py PAGE.html features.csv manifest.json", file=sys.stderr)
        return 2
    html_path, csv_path, manifest_path = sys.argv[1:]
    manifest = json.load(open(manifest_path))
    counter = Counter(manifest["tags"], manifest["attributes"])
    counter.feed(open(html_path, encoding="utf-8").read())
    counter.close()

    rows = list(csv.DictReader(open(csv_path)))
    if len(rows) != 1:
        print(f"expected one row in {csv_path}, found {len(rows)}", file=sys.stderr)
        return 1
    row = rows[0]
    expected = dict(counter.counts)
    expected["dom_nodes"] = counter.elements
    expected["tree_depth"] = counter.depth
    failures = 0
    for column, value in row.items():
        if not (column.startswith("tag.") or column.startswith("attr.") or column in ("dom_nodes", "tree_depth")):
            continue
        want = expected.get(column, 0)
        got = float(value)
        if got != want:
            print(f"{column}: extractor {got}, recount {want}")
            failures += 1
    missing = [k for k in expected if k not in row]
    for k in missing:
        print(f"{k}: counted {expected[k]} but not a column")
        failures += 1
    print(f"{failures} mismatches over {len(row)} columns")
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
