"""Seeded synthetic task-oriented dialogue corpus.

Every atomic intent is a (domain, act) pair. A message is written from one
intent's message templates; the reply intent is drawn from a skewed policy over
the acts of the same domain, so the message alone leaves the reply intent
ambiguous. That ambiguity is what makes rejected suggestions informative.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .corpus import SPLITS, Dataset, composite_intent, datasets_from_records

ACTS_PER_DOMAIN = 3
POLICY_WEIGHTS = (0.6, 0.3, 0.1)

DOMAINS = {
    "restaurant": ("table", ("bella", "curry", "dojo", "lotus")),
    "hotel": ("room", ("grand", "alpha", "riverside", "acorn")),
    "train": ("ticket", ("express", "sprinter", "coastal", "northern")),
    "taxi": ("cab", ("swift", "yellow", "citycar", "metro")),
    "attraction": ("tour", ("castle", "gallery", "botanic", "abbey")),
    "cinema": ("screening", ("odeon", "picturehouse", "arts", "vue")),
    "flight": ("seat", ("skyway", "jetline", "aero", "bluewing")),
    "museum": ("pass", ("fitz", "kettle", "whipple", "sedgwick")),
}

ACTS = ("inform", "book", "nobook", "request", "recommend", "reqmore")

MESSAGE_CUES = {
    "inform": (
        "what {domain} options do you have in the {area}",
        "tell me about {domain} places in the {area}",
        "are there any {domain} choices near the {area}",
        "i am looking for {domain} information",
        "which {domain} places are open in the {area}",
        "list the {domain} venues around the {area}",
    ),
    "book": (
        "please book a {noun} for {num} people on {day}",
        "i would like to reserve a {domain} {noun} for {day}",
        "can you get me a {domain} {noun} for {num} on {day}",
        "book the {domain} {noun} for {day}",
        "reserve {num} {domain} {noun} places for {day}",
        "i want to make a {domain} booking for {day}",
    ),
    "nobook": (
        "is there a {domain} {noun} free on {day} at short notice",
        "any chance of a last minute {domain} {noun} on {day}",
        "can i still get a {domain} {noun} tonight",
        "could you squeeze in a {domain} {noun} for {num} on {day}",
        "is the {domain} still taking bookings for {day}",
        "i left it late , any {domain} {noun} on {day}",
    ),
    "request": (
        "i need a {domain}",
        "help me find a {domain}",
        "i want a {domain} somewhere",
        "find me a {domain}",
        "looking for a {domain} for my trip",
        "i am after a {domain}",
    ),
    "recommend": (
        "what {domain} would you suggest",
        "which {domain} is the best",
        "any good {domain} you recommend",
        "what is your favourite {domain}",
        "suggest a nice {domain} in the {area}",
        "where is a great {domain} to go",
    ),
    "reqmore": (
        "thanks that is all for the {domain}",
        "great , the {domain} sounds good",
        "perfect , that {domain} works for me",
        "ok the {domain} is sorted then",
        "lovely , cheers for the {domain} help",
        "brilliant , the {domain} is fine",
    ),
}

# reply bodies carry no domain words: the domain is the leading topic tag, so
# an n-gram generator fixes it once from the message and cannot drift later
REPLY_PHRASES = {
    "inform": (
        "there are {num} options in the {area} .",
        "we have {num} places near the {area} .",
        "the {area} has {num} choices .",
        "i found {num} listings in the {area} .",
        "{num} venues match in the {area} .",
        "the guide shows {num} results for the {area} .",
    ),
    "book": (
        "your booking at {name} is confirmed for {day} , reference {ref} .",
        "the booking is confirmed for {num} on {day} , reference {ref} .",
        "done , it is reserved for {day} .",
        "i have booked it , your reference is {ref} .",
        "great news , {name} has confirmed your place for {day} .",
        "all set , {num} places held under reference {ref} .",
    ),
    "nobook": (
        "sorry , it is fully booked on {day} .",
        "unfortunately nothing is available on {day} .",
        "i could not book {name} for you .",
        "booking failed , {name} has no space left .",
        "there is nothing free for {num} on {day} .",
        "sadly every place is taken on {day} .",
    ),
    "request": (
        "which area would you like ?",
        "what day do you need it ?",
        "how many people is it for ?",
        "do you have a price range ?",
        "what time suits you ?",
        "any preference on the location ?",
    ),
    "recommend": (
        "i recommend {name} , a lovely spot in the {area} .",
        "you might enjoy {name} in the {area} .",
        "{name} is a popular choice nearby .",
        "try {name} , it is great .",
        "my suggestion is {name} in the {area} .",
        "people love {name} , it is excellent .",
    ),
    "reqmore": (
        "is there anything else i can help with ?",
        "can i help you with anything else today ?",
        "will you need anything else ?",
        "anything more i can do for you ?",
        "do you need help with something else ?",
        "shall i look into anything else ?",
    ),
}
REPLY_NAMES = tuple(n for _, names in DOMAINS.values() for n in names)

OPENERS = ("", "hi ,", "hello ,", "excuse me ,", "good morning ,")
# a subject line closes every message; it sits right before the reply so a short
# generator context still sees the domain and the kind of request
CLOSERS = ("re : {domain} {topic}", "subject : {domain} {topic}", "about : {domain} {topic}", "ref : {domain} {topic}")
TOPICS = {
    "inform": "info", "book": "booking", "nobook": "availability",
    "request": "search", "recommend": "tips", "reqmore": "wrapup",
}

SLOTS = {
    "num": ("2", "3", "4", "5", "6", "7"),
    "day": ("monday", "tuesday", "wednesday", "thursday", "friday", "saturday", "sunday"),
    "area": ("north", "south", "east", "west", "centre"),
    "ref": ("k7m2", "q4x9", "b2r8", "z5t1", "h3n6", "w8c4", "p1d7", "m6j3"),
}

SYNONYMS = {
    "please": "kindly", "book": "reserve", "reserve": "book", "sorry": "apologies",
    "unfortunately": "sadly", "help": "assist", "need": "require", "want": "need",
    "great": "good", "lovely": "nice", "find": "locate", "popular": "famous",
    "options": "choices", "choices": "options", "confirmed": "secured",
    "available": "free", "suggest": "propose", "best": "top",
}


@dataclass(frozen=True)
class SyntheticSpec:
    n_atomic_intents: int = 12
    n_templates_per_intent: int = 4
    multi_intent_prob: float = 0.15
    n_train: int = 5000
    n_valid: int = 500
    n_test: int = 1000
    lexical_noise_prob: float = 0.05
    seed: int = 0

    def validate(self) -> None:
        for name in ("multi_intent_prob", "lexical_noise_prob"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {p}")
        for name in ("n_atomic_intents", "n_templates_per_intent", "n_train", "n_valid", "n_test"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        max_intents = len(DOMAINS) * ACTS_PER_DOMAIN
        if not 2 <= self.n_atomic_intents <= max_intents:
            raise ValueError(f"n_atomic_intents must be in [2, {max_intents}]")
        max_templates = min(len(MESSAGE_CUES["inform"]), len(REPLY_PHRASES["inform"]))
        # one message template per intent is held out of train
        if not 2 <= self.n_templates_per_intent <= max_templates:
            raise ValueError(f"n_templates_per_intent must be in [2, {max_templates}]")
        if self.n_test < self.n_atomic_intents:
            raise ValueError("n_test must be >= n_atomic_intents (held-out template coverage)")

    def to_dict(self) -> dict:
        return asdict(self)


def intent_layout(n_atomic_intents: int) -> list[tuple[str, str]]:
    """(domain, act) pairs; domain j covers ACTS_PER_DOMAIN acts rotated by j."""
    layout = []
    for j, domain in enumerate(DOMAINS):
        for t in range(ACTS_PER_DOMAIN):
            layout.append((domain, ACTS[(j + t) % len(ACTS)]))
    return layout[:n_atomic_intents]


class _Generator:
    def __init__(self, spec: SyntheticSpec):
        spec.validate()
        self.spec = spec
        self.layout = intent_layout(spec.n_atomic_intents)
        self.names = [f"{d}-{a}" for d, a in self.layout]
        self.groups: dict[str, list[int]] = {}
        for i, (d, _) in enumerate(self.layout):
            self.groups.setdefault(d, []).append(i)

        rng = np.random.default_rng([spec.seed, 0])
        k = spec.n_templates_per_intent
        self.msg_templates = []
        self.reply_templates = []
        for d, a in self.layout:
            cues = rng.permutation(len(MESSAGE_CUES[a]))[:k]
            self.msg_templates.append([
                (int(c), int(rng.integers(len(OPENERS))), int(rng.integers(len(CLOSERS))))
                for c in cues
            ])
            phrases = rng.permutation(len(REPLY_PHRASES[a]))[:k]
            self.reply_templates.append([int(p) for p in phrases])

    def policy(self, msg_intent: int) -> tuple[list[int], np.ndarray]:
        """Reply-intent candidates for a message intent, with their weights."""
        group = self.groups[self.layout[msg_intent][0]]
        pos = group.index(msg_intent)
        order = [group[(pos + t) % len(group)] for t in range(len(group))]
        w = np.asarray(POLICY_WEIGHTS[: len(order)], dtype=float)
        return order, w / w.sum()

    def _fill(self, pattern: str, domain: str, rng: np.random.Generator, names=None) -> str:
        noun, own = DOMAINS[domain]
        names = own if names is None else names
        values = {"domain": domain, "noun": noun, "name": names[rng.integers(len(names))]}
        for slot, choices in SLOTS.items():
            values[slot] = choices[rng.integers(len(choices))]
        return pattern.format(**values)

    def _noise(self, text: str, rng: np.random.Generator) -> str:
        p = self.spec.lexical_noise_prob
        out = []
        for tok in text.split():
            # a draw per token keeps the RNG stream independent of the synonym table
            u = rng.random()
            out.append(SYNONYMS[tok] if tok in SYNONYMS and u < p else tok)
        return " ".join(out)

    def message(self, intent: int, template: int, rng: np.random.Generator) -> str:
        domain, act = self.layout[intent]
        cue, opener, closer = self.msg_templates[intent][template]
        text = " ".join(
            part for part in (
                OPENERS[opener], self._fill(MESSAGE_CUES[act][cue], domain, rng),
                CLOSERS[closer].format(domain=domain, topic=TOPICS[act]),
            ) if part
        )
        return self._noise(text, rng)

    def reply(self, intent: int, rng: np.random.Generator) -> str:
        domain, act = self.layout[intent]
        phrase = self.reply_templates[intent][rng.integers(self.spec.n_templates_per_intent)]
        return self._fill(REPLY_PHRASES[act][phrase], domain, rng, REPLY_NAMES)

    def split_records(self, split: str, n: int) -> list[dict]:
        rng = np.random.default_rng([self.spec.seed, 1 + SPLITS.index(split)])
        n_intents = len(self.layout)
        held_out = self.spec.n_templates_per_intent - 1
        records = []
        for k in range(n):
            if split == "test" and k < n_intents:
                msg_intent, template = k, held_out
            else:
                msg_intent = int(rng.integers(n_intents))
                # the last template of each intent is reserved for valid/test
                template = int(rng.integers(held_out if split == "train" else held_out + 1))
            order, weights = self.policy(msg_intent)
            primary = order[int(rng.choice(len(order), p=weights))]
            intents = [primary]
            others = [i for i in order if i != primary]
            if others and rng.random() < self.spec.multi_intent_prob:
                intents.append(others[int(rng.integers(len(others)))])
            message = self.message(msg_intent, template, rng)
            parts = [self._noise(self.reply(i, rng), rng) for i in intents]
            reply = f"{self.layout[primary][0]} {join_parts(parts)}"
            records.append({
                "id": f"{split}-{k:06d}",
                "message": message,
                "reply": reply,
                "intents": [self.names[i] for i in intents],
                "_message_template": f"{self.names[msg_intent]}/{template}",
            })
        return records


def join_parts(parts: list[str]) -> str:
    """Join reply parts as one sentence so a finished part never looks like a prefix."""
    head = [p.rsplit(" ", 1)[0] if p.endswith((" .", " ?")) else p for p in parts[:-1]]
    return " and ".join(head + parts[-1:])


def synthetic_records(spec: SyntheticSpec) -> dict[str, list[dict]]:
    gen = _Generator(spec)
    sizes = {"train": spec.n_train, "valid": spec.n_valid, "test": spec.n_test}
    return {s: gen.split_records(s, sizes[s]) for s in SPLITS}


def generate_synthetic(spec: SyntheticSpec) -> tuple[Dataset, Dataset, Dataset]:
    return datasets_from_records(synthetic_records(spec))


def label_of(record: dict) -> str:
    return composite_intent(record["intents"])
