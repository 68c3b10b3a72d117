#!/usr/bin/env python3
"""Regenerates the desk-scale fixtures. Output is deterministic."""
import csv
import json
import math
import random
from pathlib import Path

HERE = Path(__file__).resolve().parent
DATA = HERE.parent

# Rectangular stand-ins for real counties: fips, name, lat0, lat1, lon0, lon1.
COUNTIES = [
    ("50013", "Grand Isle", 44.70, 45.01, -73.43, -73.20),
    ("50011", "Franklin", 44.70, 45.01, -73.20, -72.60),
    ("50019", "Orleans", 44.70, 45.01, -72.60, -71.90),
    ("50009", "Essex", 44.35, 45.01, -71.90, -71.46),
    ("50007", "Chittenden", 44.35, 44.70, -73.43, -72.85),
    ("50015", "Lamoille", 44.35, 44.70, -72.85, -72.35),
    ("50005", "Caledonia", 44.35, 44.70, -72.35, -71.90),
    ("50001", "Addison", 43.90, 44.35, -73.43, -72.95),
    ("50023", "Washington", 43.90, 44.35, -72.95, -72.25),
    ("50017", "Orange", 43.90, 44.35, -72.25, -71.46),
    ("50021", "Rutland", 43.25, 43.90, -73.43, -72.80),
    ("50027", "Windsor", 43.25, 43.90, -72.80, -71.46),
    ("50003", "Bennington", 42.73, 43.25, -73.43, -72.90),
    ("50025", "Windham", 42.73, 43.25, -72.90, -71.46),
    ("10003", "New Castle", 39.35, 39.84, -75.79, -75.05),
    ("10001", "Kent", 38.85, 39.35, -75.79, -75.05),
    ("10005", "Sussex", 38.45, 38.85, -75.79, -75.05),
    ("25003", "Berkshire", 41.90, 42.75, -73.51, -73.00),
    ("25013", "Hampden", 41.90, 42.75, -73.00, -72.20),
    ("25027", "Worcester", 41.90, 42.75, -72.20, -71.50),
    ("25017", "Middlesex", 41.90, 42.75, -71.50, -71.10),
    ("25025", "Suffolk", 41.90, 42.75, -71.10, -70.90),
    ("36061", "New York", 40.70, 40.88, -74.02, -73.955),
    ("36081", "Queens", 40.70, 40.80, -73.955, -73.70),
    ("36047", "Kings", 40.57, 40.70, -74.04, -73.85),
    ("36001", "Albany", 42.45, 42.82, -74.27, -73.68),
    ("36029", "Erie", 42.44, 43.10, -79.06, -78.46),
    ("36055", "Monroe", 43.00, 43.37, -77.99, -77.37),
]

STATES = {"VT": "vermont", "DE": "delaware", "MA": "massachusetts", "NY": "new york"}

# city, state, lat, lon, fips, population.
PLACES = [
    ("burlington", "VT", 44.4759, -73.2121, "50007", 42819),
    ("south burlington", "VT", 44.4669, -73.1710, "50007", 19474),
    ("essex junction", "VT", 44.4906, -73.1112, "50007", 10590),
    ("montpelier", "VT", 44.2601, -72.5754, "50023", 8074),
    ("barre", "VT", 44.1970, -72.5020, "50023", 8491),
    ("rutland", "VT", 43.6106, -72.9726, "50021", 15807),
    ("bennington", "VT", 42.8781, -73.1968, "50003", 15333),
    ("brattleboro", "VT", 42.8509, -72.5579, "50025", 12046),
    ("st. johnsbury", "VT", 44.4193, -72.0151, "50005", 7364),
    ("st. albans", "VT", 44.8109, -73.0832, "50011", 6877),
    ("middlebury", "VT", 44.0153, -73.1673, "50001", 9152),
    ("newport", "VT", 44.9364, -72.2051, "50019", 4455),
    ("springfield", "VT", 43.2984, -72.4823, "50027", 9062),
    ("white river junction", "VT", 43.6490, -72.3190, "50027", 2286),
    ("island pond", "VT", 44.8134, -71.8801, "50009", 821),
    ("stowe", "VT", 44.4654, -72.6874, "50015", 4314),
    ("bradford", "VT", 43.9928, -72.1287, "50017", 2797),
    ("grand isle", "VT", 44.7200, -73.2900, "50013", 2067),
    ("wilmington", "DE", 39.7391, -75.5398, "10003", 70851),
    ("newark", "DE", 39.6837, -75.7497, "10003", 31454),
    ("middletown", "DE", 39.4496, -75.7163, "10003", 18871),
    ("dover", "DE", 39.1582, -75.5244, "10001", 36047),
    ("smyrna", "DE", 39.2998, -75.6046, "10001", 10023),
    ("milford", "DE", 38.9126, -75.4277, "10001", 9559),
    ("georgetown", "DE", 38.6901, -75.3855, "10005", 6422),
    ("lewes", "DE", 38.7745, -75.1393, "10005", 2747),
    ("rehoboth beach", "DE", 38.7209, -75.0760, "10005", 1327),
    ("pittsfield", "MA", 42.4501, -73.2454, "25003", 44737),
    ("north adams", "MA", 42.7009, -73.1087, "25003", 13708),
    ("springfield", "MA", 42.1015, -72.5898, "25013", 153606),
    ("holyoke", "MA", 42.2043, -72.6162, "25013", 40117),
    ("worcester", "MA", 42.2626, -71.8023, "25027", 182544),
    ("framingham", "MA", 42.2793, -71.4162, "25017", 68318),
    ("lowell", "MA", 42.6334, -71.3162, "25017", 108861),
    ("burlington", "MA", 42.5048, -71.1956, "25017", 24498),
    ("cambridge", "MA", 42.3736, -71.1097, "25017", 105162),
    ("boston", "MA", 42.3601, -71.0589, "25025", 617594),
    ("new york", "NY", 40.7831, -73.9712, "36061", 1585873),
    ("long island city", "NY", 40.7447, -73.9485, "36081", 24000),
    ("flushing", "NY", 40.7675, -73.8331, "36081", 72008),
    ("jamaica", "NY", 40.7027, -73.7890, "36081", 216866),
    ("brooklyn", "NY", 40.6782, -73.9442, "36047", 2504700),
    ("albany", "NY", 42.6526, -73.7562, "36001", 97856),
    ("buffalo", "NY", 42.8864, -78.8784, "36029", 261310),
    ("rochester", "NY", 43.1566, -77.6088, "36055", 210565),
]

# Coarse outlines, (lon, lat) rings as GeoJSON expects.
US_LOWER48 = [(-124.8, 48.4), (-123.0, 49.0), (-95.2, 49.0), (-89.6, 48.0), (-82.4, 45.3),
              (-82.5, 41.7), (-79.0, 43.3), (-76.0, 44.2), (-74.7, 45.0), (-71.5, 45.0),
              (-69.2, 47.4), (-67.8, 47.1), (-66.9, 44.8), (-70.0, 41.5), (-74.0, 40.4),
              (-75.5, 38.5), (-75.9, 35.2), (-81.1, 31.8), (-80.0, 26.8), (-80.4, 25.1),
              (-81.8, 24.5), (-82.7, 27.5), (-84.3, 30.0), (-89.4, 30.0), (-89.6, 28.9),
              (-94.0, 29.5), (-97.2, 25.9), (-99.5, 27.5), (-101.4, 29.8), (-104.7, 29.7),
              (-106.5, 31.8), (-111.1, 31.3), (-114.8, 32.5), (-117.1, 32.5), (-120.6, 34.5),
              (-124.4, 40.4), (-124.8, 48.4)]
US_ALASKA = [(-141.0, 60.0), (-141.0, 69.7), (-156.8, 71.4), (-166.7, 68.3), (-168.1, 65.6),
             (-164.9, 60.0), (-162.0, 58.5), (-165.0, 54.5), (-151.0, 59.0), (-141.0, 60.0)]
US_HAWAII = [(-160.6, 21.6), (-156.0, 18.8), (-154.7, 19.5), (-156.9, 21.3), (-160.0, 22.3),
             (-160.6, 21.6)]
UK_GB = [(-5.8, 50.0), (1.5, 51.1), (1.8, 52.9), (0.3, 53.5), (-1.6, 55.6), (-1.7, 57.6),
         (-3.0, 58.7), (-5.1, 58.7), (-6.4, 58.3), (-7.7, 57.5), (-6.3, 56.3), (-5.8, 55.2),
         (-4.8, 54.6), (-3.2, 54.0), (-3.2, 53.4), (-4.7, 53.4), (-4.2, 52.2), (-5.3, 51.7),
         (-3.0, 51.2), (-5.8, 50.0)]
UK_NI = [(-5.4, 54.4), (-5.9, 55.3), (-7.4, 55.3), (-8.2, 54.5), (-6.3, 54.0), (-5.4, 54.4)]


def feature(props, polygons):
    return {"type": "Feature", "properties": props,
            "geometry": {"type": "MultiPolygon",
                         "coordinates": [[[list(p) for p in ring]] for ring in polygons]}}


def rect(lat0, lat1, lon0, lon1):
    return [(lon0, lat0), (lon1, lat0), (lon1, lat1), (lon0, lat1), (lon0, lat0)]


def write_json(path, doc):
    path.write_text(json.dumps(doc, indent=1) + "\n")


def alter(name, rng):
    """One-character substitution at a letter position."""
    positions = [i for i, ch in enumerate(name) if ch.isalpha()]
    i = rng.choice(positions)
    repl = rng.choice([c for c in "abcdefghijklmnopqrstuvwxyz" if c != name[i]])
    return name[:i] + repl + name[i + 1:]


def decorate(city, state, rng):
    city = " ".join(w.capitalize() if rng.random() < 0.5 else w.upper() if rng.random() < 0.2 else w
                    for w in city.split(" "))
    if rng.random() < 0.3:
        city = city.replace(" ", "  ")
    st = state if rng.random() < 0.6 else STATES[state].title()
    if rng.random() < 0.3:
        st = st.lower()
    pad = " " * rng.randint(0, 2)
    return f"{pad}{city}{pad},{' ' * rng.randint(0, 2)}{st}{pad}"


def main():
    rng = random.Random(20141104)

    write_json(HERE / "counties.geojson", {
        "type": "FeatureCollection",
        "features": [feature({"fips": f, "name": n}, [rect(a, b, c, d)]) for f, n, a, b, c, d in COUNTIES]})

    with open(HERE / "gazetteer.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["city", "state", "state_full", "lat", "lon", "county_fips", "population"])
        for city, st, lat, lon, fips, pop in PLACES:
            w.writerow([city, st, STATES[st], lat, lon, fips, pop])

    write_json(DATA / "regions.geojson", {
        "type": "FeatureCollection",
        "features": [feature({"name": "US"}, [US_LOWER48, US_ALASKA, US_HAWAII]),
                     feature({"name": "UK"}, [UK_GB, UK_NI])]})

    # Location strings with the county each must resolve to ("" for none).
    with open(HERE / "locations.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["user_location", "expected_fips"])
        for _ in range(1000):
            city, st, _, _, fips, _ = rng.choice(PLACES)
            if len(city) >= 11 and rng.random() < 0.5:
                city = alter(city, rng)
            w.writerow([decorate(city, st, rng), fips])
        for bad in ["Queens, New York, USA", "Burlington Vermont", "Boston MA", "springfield",
                    ", VT", "Dover,", "Paris, France", "Burlington, Ontario"]:
            w.writerow([bad, ""])

    # Sample corpus: county-located and geotagged records with verb forms at
    # place-dependent regular rates.
    lexicon = {}
    with open(DATA / "lexicon.csv") as fh:
        for row in csv.DictReader(fh):
            irr = [f for k in ("irregular_preterite", "irregular_participle") for f in row[k].split(";") if f]
            lexicon[row["lemma"]] = (row["regular"].split(";"), irr)
    verbs = ["burn", "dream", "learn", "spell", "spill", "smell", "kneel", "dwell", "leap", "spoil",
             "sneak", "wake", "strive", "tread", "dig", "thrive", "speed", "plead", "hang", "slay"]
    fillers = ["the", "we", "a", "night", "again", "yesterday", "really", "so", "it", "and", "my", "lol"]
    with open(HERE / "sample_corpus.jsonl", "w") as fh:
        for i in range(6000):
            place = rng.choice(PLACES)
            bias = 0.15 + 0.5 * (place[2] - 38.4) / 6.7
            words = [rng.choice(fillers) for _ in range(rng.randint(3, 9))]
            for _ in range(rng.randint(1, 3)):
                reg, irr = lexicon[rng.choice(verbs)]
                form = rng.choice(reg) if (rng.random() < bias or not irr) else rng.choice(irr)
                words.insert(rng.randrange(len(words) + 1), form.capitalize() if rng.random() < 0.1 else form)
            rec = {"text": " ".join(words) + rng.choice([".", "!", " #tbt", "?"]),
                   "ts": f"2013-{1 + i % 12:02d}-{1 + i % 28:02d}T12:00:00Z"}
            if rng.random() < 0.9:
                rec["user_location"] = decorate(place[0], place[1], rng)
            if rng.random() < 0.5:
                rec["geo"] = {"lat": place[2], "lon": place[3]}
            elif rng.random() < 0.1:
                rec["geo"] = {"lat": 51.5074 + rng.uniform(-0.2, 0.2), "lon": -0.1278 + rng.uniform(-0.2, 0.2)}
            fh.write(json.dumps(rec) + "\n")
        fh.write("{not json\n")

    # ACS-style wide file over the fixture counties.
    with open(HERE / "sample_acs.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        cols = ["Estimate; Total population", "Estimate; School enrollment", "Percent; Management occupations"]
        w.writerow(["GEO.id", "GEO.id2", "GEO.display-label"] + cols)
        for fips, name, *_ in COUNTIES:
            pop = int(10 ** rng.uniform(3.5, 6.2))
            w.writerow([f"0500000US{fips}", fips, name, pop, int(pop * rng.uniform(0.15, 0.3)),
                        round(rng.uniform(8, 22), 1)])

    # n-gram series for a handful of forms, 1990-2010, percent units.
    with open(HERE / "sample_ngrams.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["form", "year", "relative_frequency_percent"])
        for lemma in ["burn", "dream", "learn", "spell", "spill", "smell", "dwell", "leap"]:
            reg, irr = lexicon[lemma]
            base = rng.uniform(1e-4, 4e-3)
            share = rng.uniform(0.2, 0.9)
            for year in range(1990, 2011):
                jitter = 1 + 0.05 * math.sin(year + len(lemma))
                w.writerow([reg[0], year, f"{base * share * jitter:.8g}"])
                w.writerow([irr[0], year, f"{base * (1 - share) / jitter:.8g}"])
                if year % 2 == 0:
                    w.writerow([irr[0].capitalize(), year, f"{base * 0.01:.8g}"])


if __name__ == "__main__":
    main()
