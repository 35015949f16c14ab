"""Synthetic police-report corpora with planted crime series.

Every narrative is stitched together from template sentences filled with words
from shared pools. Documents belonging to a series additionally carry that
series' M.O. signature: a fixed phrase of distinctive words appended to
sentences at ``signature_rate``. Random cases never carry a signature.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from ..corpus import Record, RecordSet
from ..errors import InvalidConfigError

TABLE1_SERIES_SIZES = (8, 7, 4, 15, 22)
TABLE1_N_RANDOM = 441
TABLE1_CATEGORIES = (
    "robbery at residence",
    "robbery at gas station",
    "pedestrian robbery",
    "attempt auto theft",
    "burglary",
)

_ACTORS = """suspect male female subject offender juvenile individual perpetrator accomplice driver
passenger neighbor stranger man woman teen runner lookout caller associate""".split()
_ACTIONS = """grabbed took removed snatched stole pushed struck pointed demanded entered forced kicked
broke opened searched ransacked threatened displayed brandished approached followed pulled shoved
carried damaged pried smashed cut jumped climbed hid ran""".split()
_OBJECTS = """purse wallet phone laptop television jewelry cash register keys backpack tablet bicycle
handgun knife tools speaker console watch ring necklace bag briefcase camera printer drill radio
tires battery catalytic converter medication""".split()
_PLACES = """apartment residence house garage store station parking lot driveway porch backyard
alley sidewalk lobby hallway stairwell bedroom kitchen office counter pump restaurant motel bus
stop park corner shop pharmacy bank entrance""".split()
_DIRECTIONS = "north south east west northbound southbound eastbound westbound".split()
_STREETS = """peachtree ponce piedmont boulevard marietta spring juniper cascade campbellton
memorial edgewood moreland glenwood howell hollowell simpson northside lee cleveland metropolitan
delowe""".split()
_STREET_TYPES = "street avenue road drive way place court lane parkway".split()
_COLORS = "black white silver gray red blue green gold maroon tan dark light".split()
_VEHICLES = "sedan truck suv van coupe motorcycle hatchback pickup scooter wagon".split()
_CLOTHING = """hoodie jacket jeans cap shirt sweatpants shorts mask gloves boots sneakers
coat vest beanie""".split()
_WITNESSES = "witness victim clerk manager security guard resident employee officer complainant".split()
_CRIMES = """robbery theft burglary larceny dispute assault trespass disturbance shoplifting
vandalism""".split()

_SIGNATURE_WORDS = """crowbar pillowcase zipties duct tape balaclava bandana screwdriver slimjim
flashlight bolt cutters sledgehammer brick rock spraypaint fake badge uniform delivery costume
wig sunglasses toy pistol airsoft machete taser pepper spray ladder rear window sliding door
doggy door chimney skylight basement vent garden hose shovel tire iron gasoline lighter
shopping cart stroller wheelchair crutches umbrella walkie talkie""".split()
_SIGNATURE_WORDS = list(dict.fromkeys(_SIGNATURE_WORDS))

_TEMPLATES = (
    "The {actor} {action} the {object} at the {place}.",
    "{witness} stated the {actor} {action} a {object} from the {place}.",
    "Officer responded to the {place} in reference to a {crime}.",
    "The {actor} fled {direction} on {street} {street_type} in a {color} {vehicle}.",
    "{witness} advised the {actor} wore a {color} {clothing} and {color} {clothing}.",
    "Upon arrival the {witness} said the {object} was taken near the {place}.",
    "The {actor} was last seen {direction} toward {street} {street_type}.",
    "The {actor} {action} the {witness} and {action} the {object}.",
    "No injuries were reported at the {place} on {street} {street_type}.",
    "The {color} {vehicle} was parked by the {place} with the {object} inside.",
)

_SLOT_POOLS = {
    "actor": _ACTORS,
    "action": _ACTIONS,
    "object": _OBJECTS,
    "place": _PLACES,
    "direction": _DIRECTIONS,
    "street": _STREETS,
    "street_type": _STREET_TYPES,
    "color": _COLORS,
    "vehicle": _VEHICLES,
    "clothing": _CLOTHING,
    "witness": _WITNESSES,
    "crime": _CRIMES,
}

_SYLLABLES = "ka lo mi ra tu ve no si da pe zo bu gi ha ye".split()


@dataclass(frozen=True)
class SynthConfig:
    n_series: int = 5
    series_sizes: tuple[int, ...] = TABLE1_SERIES_SIZES
    n_random: int = TABLE1_N_RANDOM
    # words per slot pool; 0 keeps the built-in list, larger values pad it with pseudo-words
    vocab_pool: dict[str, int] = field(default_factory=dict)
    mo_signature_size: int = 4
    signature_rate: float = 0.5
    sentences_per_doc: tuple[int, int] = (8, 14)
    n_random_categories: int = 89
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "series_sizes", tuple(int(s) for s in self.series_sizes))
        object.__setattr__(self, "sentences_per_doc", tuple(int(s) for s in self.sentences_per_doc))
        object.__setattr__(self, "vocab_pool", dict(self.vocab_pool))

    def validate(self) -> None:
        if self.n_series < 1 or len(self.series_sizes) != self.n_series:
            raise InvalidConfigError(
                f"series_sizes has {len(self.series_sizes)} entries for n_series={self.n_series}")
        if any(s < 1 for s in self.series_sizes) or self.n_random < 1:
            raise InvalidConfigError("series sizes and n_random must be >= 1")
        if self.mo_signature_size < 1:
            raise InvalidConfigError("mo_signature_size must be >= 1")
        if not 0.0 < self.signature_rate <= 1.0:
            raise InvalidConfigError("signature_rate must lie in (0, 1]")
        lo, hi = self.sentences_per_doc
        if not 1 <= lo <= hi:
            raise InvalidConfigError("sentences_per_doc must satisfy 1 <= min <= max")
        if self.n_series * self.mo_signature_size > len(_SIGNATURE_WORDS):
            raise InvalidConfigError(
                f"only {len(_SIGNATURE_WORDS)} signature words for {self.n_series} series "
                f"of {self.mo_signature_size} words each")
        unknown = set(self.vocab_pool) - set(_SLOT_POOLS)
        if unknown:
            raise InvalidConfigError(f"unknown vocab_pool slots {sorted(unknown)}")
        if any(v < 0 for v in self.vocab_pool.values()):
            raise InvalidConfigError("vocab_pool sizes must be >= 0")
        if self.n_random_categories < 1:
            raise InvalidConfigError("n_random_categories must be >= 1")

    def to_dict(self) -> dict:
        return asdict(self)


def benchmark_config(seed: int = 0, **overrides) -> SynthConfig:
    """Five series of sizes 8/7/4/15/22 plus 441 random cases (497 records)."""
    return SynthConfig(seed=seed, **overrides)


def _pseudo_word(rng: np.random.Generator) -> str:
    return "".join(rng.choice(_SYLLABLES, size=rng.integers(2, 4)))


def _pools(config: SynthConfig, rng: np.random.Generator) -> dict[str, list[str]]:
    pools = {}
    for slot, base in _SLOT_POOLS.items():
        size = config.vocab_pool.get(slot, 0)
        words = list(base)
        seen = set(words) | set(_SIGNATURE_WORDS)
        while size and len(words) < size:
            w = _pseudo_word(rng)
            if w not in seen:
                seen.add(w)
                words.append(w)
        pools[slot] = words[:size] if size else words
    return pools


def _sentence(template: str, pools: dict[str, list[str]], rng: np.random.Generator) -> str:
    out, rest = [], template
    while "{" in rest:
        pre, _, tail = rest.partition("{")
        slot, _, rest = tail.partition("}")
        out.append(pre)
        pool = pools[slot]
        out.append(pool[rng.integers(len(pool))])
    out.append(rest)
    text = "".join(out)
    return text[0].upper() + text[1:]


def _narrative(pools, rng, n_sentences: int, signature: str | None, rate: float) -> str:
    sentences = []
    hits = 0
    for _ in range(n_sentences):
        s = _sentence(_TEMPLATES[rng.integers(len(_TEMPLATES))], pools, rng)
        if signature is not None and rng.random() < rate:
            s = f"{s[:-1]} using {signature}."
            hits += 1
        sentences.append(s)
    if signature is not None and hits == 0:
        # a series member always shows its M.O. at least once
        i = rng.integers(n_sentences)
        sentences[i] = f"{sentences[i][:-1]} using {signature}."
    return " ".join(sentences)


def generate_synthetic_corpus(config: SynthConfig = SynthConfig()) -> RecordSet:
    """Deterministic labeled corpus; series records come first, then random cases, then shuffled."""
    config.validate()
    rng = np.random.default_rng(config.seed)
    pools = _pools(config, rng)
    sig_words = rng.permutation(_SIGNATURE_WORDS)
    k = config.mo_signature_size
    signatures = [" ".join(sig_words[i * k:(i + 1) * k]) for i in range(config.n_series)]
    random_categories = [f"category {i:02d}" for i in range(config.n_random_categories)]
    lo, hi = config.sentences_per_doc

    drafts: list[tuple[str, str, str | None]] = []
    for s, size in enumerate(config.series_sizes):
        category = TABLE1_CATEGORIES[s] if s < len(TABLE1_CATEGORIES) else f"series category {s + 1}"
        for _ in range(size):
            text = _narrative(pools, rng, int(rng.integers(lo, hi + 1)), signatures[s], config.signature_rate)
            drafts.append((text, category, f"series-{s + 1}"))
    for _ in range(config.n_random):
        text = _narrative(pools, rng, int(rng.integers(lo, hi + 1)), None, 0.0)
        drafts.append((text, random_categories[rng.integers(len(random_categories))], None))

    order = rng.permutation(len(drafts))
    width = len(str(len(drafts)))
    return RecordSet(
        Record(id=f"R{i:0{width}d}", narrative=drafts[j][0], category=drafts[j][1], series=drafts[j][2])
        for i, j in enumerate(order)
    )


def series_signatures(config: SynthConfig) -> list[list[str]]:
    """The signature words each series uses, in series order (reproduces the generator's draw)."""
    rng = np.random.default_rng(config.seed)
    _pools(config, rng)
    sig_words = rng.permutation(_SIGNATURE_WORDS)
    k = config.mo_signature_size
    return [list(sig_words[i * k:(i + 1) * k]) for i in range(config.n_series)]
