#!/usr/bin/env python3
"""Regenerate the vendor-format payload fixtures under data/fixtures.

The payloads are deterministic. Cells with hand-checkable yield indices:

  Prosperidad 30-60: 41 rents averaging 1371.95, 36 sales whose mean monthly
                     mortgage is 1581.86 under the default terms (index 0.867)
  Acacias  30-60/60-90/90-120: indices 1.03, 1.08, 1.56 (average 1.22)
  Adelfas  30-60/60-90/90-120: indices 1.06, 1.13, 1.02 (average 1.07)

Other records exercise cleaning: bare and escaped unicode sequences,
pretty-printed whitespace, duplicates across pages, vendor floor codes,
houses without a floor, a studio below 30 m2 and a district-only record.

The golden dataset is produced by the CLI, not by this script:
  rentyield ingest --fixtures data/fixtures/payloads --out data/fixtures/golden/dataset.jsonl
"""

import hashlib
import json
import math
import random
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent / "data" / "fixtures"

RATE, MONTHS, TCOST, DOWN = 0.0016, 360, 0.067, 0.30


def mortgage_factor():
    a = (1 + RATE) ** MONTHS
    return (1 + TCOST - DOWN) * RATE * a / (a - 1)


K = mortgage_factor()

CENTERS = {
    "Prosperidad": (40.4440, -3.6740),
    "Acacias": (40.4040, -3.7050),
    "Adelfas": (40.4010, -3.6710),
    "Opau00f1el": (40.3880, -3.7280),
}

rng = random.Random(20190415)
counter = [0]


def next_code(op):
    counter[0] += 1
    return f"{'R' if op == 'rent' else 'S'}{counter[0]:05d}"


def record(op, price, size, hood, **extra):
    lat0, lon0 = CENTERS.get(hood, (40.33, -3.76))
    r = {
        "propertyCode": next_code(op),
        "operation": op,
        "price": price,
        "size": size,
        "exterior": rng.random() < 0.8,
        "floor": str(rng.randint(1, 7)),
        "hasLift": rng.random() < 0.7,
        "numPhotos": rng.randint(5, 40),
        "propertyType": "flat",
        "status": "good",
        "bathrooms": max(1, round(size / 60)),
        "rooms": max(1, round(size / 30)),
        "latitude": round(lat0 + rng.uniform(-0.004, 0.004), 6),
        "longitude": round(lon0 + rng.uniform(-0.004, 0.004), 6),
        "neighborhood": hood,
        "district": "Madrid",
    }
    if rng.random() < 0.5:
        r["parkingSpace"] = {"hasParkingSpace": rng.random() < 0.3}
    r.update(extra)
    return r


def fill_to_mean(n, mean, lo, hi, cents=False):
    """n values in [lo, hi] whose sum is exactly n * mean (integers, or cents)."""
    scale = 100 if cents else 1
    target = round(n * mean * scale)
    vals = [rng.randint(lo * scale, hi * scale) for _ in range(n - 1)]
    last = target - sum(vals)
    i = 0
    while not lo * scale <= last <= hi * scale:
        step = 1 if last > hi * scale else -1
        vals[i % (n - 1)] += step * scale
        vals[i % (n - 1)] = min(max(vals[i % (n - 1)], lo * scale), hi * scale)
        last = target - sum(vals)
        i += 1
    vals.append(last)
    return [v / scale if cents else v for v in vals]


def sizes(n, lo, hi):
    return [rng.randint(lo, hi) for _ in range(n)]


rent, sale = [], []

# Prosperidad 30-60
for p, s in zip(fill_to_mean(41, 1371.95, 1100, 1650, cents=True), sizes(41, 31, 59)):
    rent.append(record("rent", p, s, "Prosperidad"))
mean_price = 1581.86 / K
for p, s in zip(fill_to_mean(36, mean_price, 480000, 650000), sizes(36, 31, 59)):
    sale.append(record("sale", p, s, "Prosperidad"))


def constructed_cell(hood, size_lo, size_hi, index, mean_rent):
    rents = fill_to_mean(4, mean_rent, int(mean_rent) - 150, int(mean_rent) + 150)
    mean_mortgage = (sum(rents) / 4) / index
    sales = fill_to_mean(3, mean_mortgage / K, int(mean_mortgage / K) - 20000, int(mean_mortgage / K) + 20000)
    for p, s in zip(rents, sizes(4, size_lo, size_hi)):
        rent.append(record("rent", p, s, hood))
    for p, s in zip(sales, sizes(3, size_lo, size_hi)):
        sale.append(record("sale", p, s, hood))


for hood, indices in (("Acacias", (1.03, 1.08, 1.56)), ("Adelfas", (1.06, 1.13, 1.02))):
    for (lo, hi), idx, r in zip(((31, 59), (61, 89), (91, 119)), indices, (900, 1200, 1500)):
        constructed_cell(hood, lo, hi, idx, r)

# Opanel: rent-only and sale-only cells, codes, houses, a studio.
rent.append(record("rent", 950, 70, "Opau00f1el", floor="bj"))
rent.append(record("rent", 880, 65, "Opau00f1el", floor="en", status="renew"))
rent.append(record("rent", 1300, 130, "Opau00f1el", propertyType="chalet", floor=None))
rent.append(record("rent", 600, 25, "Opau00f1el", propertyType="studio"))
sale.append(record("sale", 310000, 160, "Opau00f1el", propertyType="chalet", floor=None))
sale.append(record("sale", 145000, 75, "Opau00f1el", floor="ss", status="newdevelopment", newDevelopment=True))
sale.append(record("sale", 205000, 95, "Opau00f1el", propertyType="duplex", floor="st"))
# District-only record with a bare escape in the name.
leg = record("rent", 720, 80, "", district="Leganu00e9s")
del leg["neighborhood"]
rent.append(leg)
leg_sale = record("sale", 150800, 80, "", district="Leganés", price_note="worked example")
del leg_sale["neighborhood"]
del leg_sale["price_note"]
sale.append(leg_sale)

for r in rent + sale:
    if r.get("floor", "x") is None:
        del r["floor"]


def pages(records, n_pages):
    size = math.ceil(len(records) / n_pages)
    out = [records[i * size:(i + 1) * size] for i in range(n_pages)]
    # Re-list the last record of each page at the start of the next one.
    for i in range(1, n_pages):
        out[i].insert(0, dict(out[i - 1][-1]))
    return out


def dump_page(records, op, page, total_pages):
    body = {
        "elementList": records,
        "total": sum(1 for _ in records),
        "totalPages": total_pages,
        "actualPage": page,
        "itemsPerPage": 50,
        "summary": [f"{op} listings"],
    }
    # Escaped non-ASCII, pretty-printed with tabs: the cleaner has to cope.
    text = json.dumps(body, ensure_ascii=True, indent="\t")
    if page == 2:
        text = text.replace('"status": "renew"', '"status":  "renew"\r')
    return text + "\n"


def main():
    # Duplicate with an updated price: keep-last must pick the second copy.
    dup = dict(rent[-3])
    dup["price"] = 1250
    rent.append(dup)
    files = {}
    for op, records in (("rent", rent), ("sale", sale)):
        for i, recs in enumerate(pages(records, 3), start=1):
            name = f"{op}_p{i}.json"
            text = dump_page(recs, op, i, 3)
            (ROOT / "payloads" / name).write_text(text, encoding="utf-8")
            files[name] = hashlib.sha256(text.encode()).hexdigest()

    boundaries = {"type": "FeatureCollection", "features": []}
    for i, name in enumerate(["Prosperidad", "Acacias", "Adelfas", "Opañel", "Leganés"]):
        x, y = -3.75 + 0.02 * i, 40.38
        ring = [[x, y], [x + 0.02, y], [x + 0.02, y + 0.02], [x, y + 0.02], [x, y]]
        boundaries["features"].append(
            {"type": "Feature", "properties": {"name": name}, "geometry": {"type": "Polygon", "coordinates": [ring]}}
        )
    (ROOT / "boundaries.geojson").write_text(json.dumps(boundaries, ensure_ascii=False, indent=1) + "\n", encoding="utf-8")

    manifest = {
        "generator": "tools/make_fixtures.py",
        "mortgage_defaults": {"rate": RATE, "term": MONTHS, "tcost": TCOST, "down": DOWN},
        "cells": {
            "prosperidad/30-60": {"mean_rent": 1371.95, "mean_mortgage": 1581.86, "index": 0.867},
            "acacias": {"30-60": 1.03, "60-90": 1.08, "90-120": 1.56, "average": 1.22},
            "adelfas": {"30-60": 1.06, "60-90": 1.13, "90-120": 1.02, "average": 1.07},
        },
        "payload_sha256": files,
    }
    (ROOT / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")


if __name__ == "__main__":
    main()
