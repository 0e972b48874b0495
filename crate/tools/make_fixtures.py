"""Writes the synthetic 10 x 4 bundles used by the end-to-end tests.

convergent.jsonl: every answer restates the prompt's three topics with the
prompt's own vocabulary.
divergent.jsonl: same paraphrases, answers drawn from unrelated vocabulary.
"""

import json
import pathlib

OUT = pathlib.Path(__file__).resolve().parent.parent / "crates" / "core" / "tests" / "fixtures"

TELESCOPE = [
    "The Hubble telescope observes distant galaxies in visible light.",
    "Hubble, the orbiting telescope, observes distant galaxies in visible light.",
    "Distant galaxies are observed by the Hubble telescope in visible light.",
    "In visible light the Hubble telescope observes distant galaxies.",
    "The orbiting Hubble telescope observes galaxies that are distant.",
]
MIRROR = [
    "Its primary mirror was polished with a spherical aberration flaw.",
    "A spherical aberration flaw was polished into its primary mirror.",
    "The primary mirror carried a polishing flaw called spherical aberration.",
    "Polishing left the primary mirror with a spherical aberration flaw.",
    "The mirror flaw, a spherical aberration, came from polishing the primary mirror.",
]
REPAIR = [
    "Astronauts on servicing missions installed corrective optics to repair it.",
    "Servicing missions sent astronauts to install corrective optics and repair it.",
    "Corrective optics were installed by astronauts during servicing missions to repair it.",
    "To repair it, astronauts on servicing missions installed corrective optics.",
    "Astronauts repaired it by installing corrective optics on servicing missions.",
]

# Convergent answers: the prompt's vocabulary plus one or two new words.
ECHO = [
    [
        "Today the Hubble telescope observes distant galaxies in visible light.",
        "The Hubble telescope still observes distant galaxies in visible light.",
        "Hubble, the orbiting telescope, routinely observes distant galaxies in visible light.",
    ],
    [
        "Its primary mirror was famously polished with a spherical aberration flaw.",
        "Early on, a spherical aberration flaw was polished into its primary mirror.",
        "The primary mirror carried a polishing flaw known as spherical aberration.",
    ],
    [
        "Astronauts on later servicing missions installed corrective optics to repair it.",
        "Servicing missions eventually sent astronauts to install corrective optics and repair it.",
        "Corrective optics were installed by astronauts on servicing missions, which repaired it.",
    ],
]

# Divergent answers: two themes sharing no vocabulary with the prompt.
COOKING = [
    "Slow roasted garlic turns into a sweet paste for warm bread.",
    "Roasted garlic spread on warm bread tastes sweet and mellow.",
    "Spread a sweet roasted garlic paste over slices of warm bread.",
]
FOOTBALL = [
    "The midfielder curled a free kick into the top corner of the net.",
    "A curled free kick from the midfielder found the top corner of the net.",
    "Into the top corner of the net, the midfielder curled his free kick.",
]


def paraphrase(m):
    """Two sentences per prompt topic."""
    parts = []
    for topic in (TELESCOPE, MIRROR, REPAIR):
        parts += [topic[m % 5], topic[(m + 2) % 5]]
    return " ".join(parts)


def convergent_answer(m, n):
    return " ".join(ECHO[t][(m + n + t) % 3] for t in range(3))


def divergent_answer(m, n):
    theme = COOKING if (m + n) % 2 == 0 else FOOTBALL
    return " ".join([theme[(m + n) % 3], theme[(m + n + 1) % 3]])


def write(name, answer):
    paraphrases = [paraphrase(m) for m in range(10)]
    header = {
        "record": "header",
        "schema": "sdm_bundle_v1",
        "original_prompt": paraphrases[0],
        "paraphrases": paraphrases,
        "m": 10,
        "n": 4,
        "model_id": "synthetic-fixture",
        "sampling_temperature": 1.0,
        "created_at": "2025-01-01T00:00:00Z",
        "provider_trace": {"fixture": name},
    }
    lines = [json.dumps(header)]
    for m in range(10):
        for n in range(4):
            rec = {"record": "answer", "schema": "sdm_bundle_v1", "m": m, "n": n, "text": answer(m, n)}
            lines.append(json.dumps(rec))
    (OUT / f"{name}.jsonl").write_text("\n".join(lines) + "\n")


if __name__ == "__main__":
    OUT.mkdir(parents=True, exist_ok=True)
    write("convergent", convergent_answer)
    write("divergent", divergent_answer)
