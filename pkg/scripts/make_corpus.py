#!/usr/bin/env python3
"""Regenerate the bundled synthetic templated corpus.

Documents are news-style: a city/media prefix, a lead sentence, then a body
that keeps returning to the document's topic with topic-specific verbs and
object phrases. Most sentences end on a topic-bound word so a short n-gram
window can carry the topic across sentence boundaries; "filler" sentences
made of globally common words break that chain on purpose, which is what the
critics and the PoE penalty are supposed to punish.

Usage: python scripts/make_corpus.py [output-path]
"""

import sys
from pathlib import Path

import numpy as np

TOPICS = {
    "volcano": (["erupted", "rumbled", "smoldered"], ["lava", "ashfall", "crater"]),
    "flood": (["crested", "receded", "surged"], ["levee", "floodwater", "embankment"]),
    "wildfire": (["spread", "flared", "scorched"], ["brush", "firebreak", "hillside"]),
    "blizzard": (["intensified", "drifted", "howled"], ["snowpack", "whiteout", "plows"]),
    "earthquake": (["struck", "shook", "rattled"], ["aftershock", "epicenter", "tremor"]),
    "drought": (["deepened", "persisted", "lingered"], ["reservoir", "rainfall", "irrigation"]),
    "hurricane": (["landed", "weakened", "churned"], ["storm surge", "gusts", "evacuees"]),
    "landslide": (["buried", "loosened", "slid"], ["hillslope", "mudflow", "boulders"]),
    "protest": (["swelled", "marched", "dispersed"], ["banners", "organizers", "barricades"]),
    "election": (["tightened", "concluded", "swung"], ["ballots", "turnout", "precincts"]),
    "summit": (["convened", "stalled", "adjourned"], ["delegates", "communique", "accord"]),
    "budget": (["ballooned", "shrank", "passed"], ["deficit", "appropriations", "surplus"]),
    "strike": (["widened", "ended", "dragged"], ["pickets", "negotiators", "walkout"]),
    "trial": (["opened", "adjourned", "resumed"], ["verdict", "testimony", "jurors"]),
    "merger": (["collapsed", "closed", "advanced"], ["shareholders", "regulators", "valuation"]),
    "outbreak": (["slowed", "spiked", "subsided"], ["infections", "quarantine", "vaccines"]),
    "festival": (["launched", "wrapped", "overflowed"], ["headliners", "vendors", "fairgrounds"]),
    "stadium": (["reopened", "filled", "emptied"], ["grandstand", "turnstiles", "scoreboard"]),
    "museum": (["expanded", "reopened", "unveiled"], ["galleries", "curators", "exhibits"]),
    "bridge": (["buckled", "reopened", "swayed"], ["girders", "spans", "inspectors"]),
    "harbor": (["reopened", "silted", "bustled"], ["moorings", "dredgers", "freighters"]),
    "railway": (["stalled", "electrified", "derailed"], ["signals", "sleepers", "timetable"]),
    "orchard": (["blossomed", "froze", "recovered"], ["growers", "harvest", "saplings"]),
    "observatory": (["reopened", "tracked", "recorded"], ["telescope", "astronomers", "readings"]),
}

# sticky: sentence ends on a topic-bound word and keeps one within every
# 3-token window, so an order-4 chain can never lose the topic mid-sentence
STICKY_TEMPLATES = [
    "The {t} {v} near the {g}.",
    "The {g} slowed the {t}.",
    "The {t} {v} past the {g}.",
    "The {g} faced the {t}.",
    "The {t} threatened the {g}.",
]

# loose: sentence ends on a shared word, letting the topic chain break
LOOSE_TEMPLATES = [
    "The {t} {v} on {day}.",
    "The {t} {v} through the night.",
]

# filler: starts like a topical sentence but uses globally common words and
# ends on a shared word, so it carries no topic and breaks the topic chain
FILLERS = [
    "The story was said to be more of the same.",
    "The news was more of the same story.",
    "The day went on and the same story held.",
]

DAYS = ["monday", "tuesday", "wednesday", "thursday", "friday", "saturday", "sunday"]

# lead shapes: one hands the topic to the next sentence, two end on shared
# words and leave the continuation topic-free
LEADS = [
    "On {day} the {t} {v} near the {g}.",
    "The {t} {v} near the {g} on {day}.",
]


def load_list(path):
    return [
        line.strip()
        for line in Path(path).read_text(encoding="utf-8").splitlines()
        if line.strip() and not line.startswith("#")
    ]


def make_corpus(cities, media, docs_per_topic=16, seed=20240501):
    rng = np.random.default_rng(seed)
    docs = []
    for topic, (verbs, things) in sorted(TOPICS.items()):
        for _ in range(docs_per_topic):
            city = cities[int(rng.integers(len(cities)))]
            outlet = media[int(rng.integers(len(media)))]
            pick = lambda xs: xs[int(rng.integers(len(xs)))]
            sentences = [
                pick(LEADS).format(t=topic, v=pick(verbs), g=pick(things), day=pick(DAYS))
            ]
            for _ in range(int(rng.integers(9, 14))):
                roll = rng.random()
                if roll < 0.22:
                    tpl = pick(STICKY_TEMPLATES)
                elif roll < 0.78:
                    tpl = pick(LOOSE_TEMPLATES)
                else:
                    tpl = pick(FILLERS)
                sentences.append(
                    tpl.format(t=topic, v=pick(verbs), g=pick(things), day=pick(DAYS))
                )
            prefix = f"{city}, ({outlet}) --"
            docs.append(prefix + " " + " ".join(sentences))
    order = rng.permutation(len(docs))
    return [docs[i] for i in order]


def main():
    root = Path(__file__).resolve().parent.parent
    out = Path(sys.argv[1]) if len(sys.argv) > 1 else root / "src/infodistill/data/synthetic_corpus.txt"
    data = root / "src/infodistill/data"
    docs = make_corpus(load_list(data / "cities.txt"), load_list(data / "media.txt"))
    out.write_text("\n".join(docs) + "\n", encoding="utf-8")
    print(f"wrote {len(docs)} documents to {out}")


if __name__ == "__main__":
    main()
