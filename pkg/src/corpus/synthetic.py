"""Desk-scale multi-hop corpora with bridge and comparison questions.

A seeded world holds one short "article" per entity: its kind, home city,
founding year, one partner entity it links to, and filler sentences. Examples
sample two gold articles plus distractor articles from that world, so every
answer is recoverable from the two gold supporting sentences.
"""
from dataclasses import dataclass
from typing import Dict, List, Tuple

import numpy as np

from src.common.errors import ConfigError
from src.common.logging import get_logger
from src.corpus.models import Paragraph, QAExample, QuestionType, Sentence, SynthConfig
from src.corpus.text import tokenize

logger = get_logger(__name__)

SYLLABLES = ["ka", "lo", "ven", "dra", "mi", "sor", "tel", "bru", "nak", "zi",
             "por", "wen", "gal", "rid", "fu", "mar", "kel", "to", "sha", "vin"]
CITY_SUFFIXES = ["burg", "ton", "ville", "stad", "holm"]
KINDS = ["band", "club", "company", "studio", "label", "team"]
NOUNS = ["music", "records", "games", "tools", "films", "books", "designs", "shows"]
ADJECTIVES = ["bright", "quiet", "strange", "modern", "classic", "bold", "gentle"]
FILLERS = [
    "{name} is known for its {adj} {noun} .",
    "{name} has produced many {adj} {noun} .",
    "{name} often works on {noun} for young people .",
    "{name} gained attention for {adj} {noun} .",
]
YEARS = list(range(1920, 2000, 10))
# question text, answer, supporting facts, gold titles
Question = Tuple[str, str, List[Tuple[str, int]], List[str]]

TEMPLATE_WORDS = sorted(set(
    " ".join(FILLERS + [
        "is a from . was founded in . worked with on",
        "Which city is the partner of from ? In which year was the partner of founded ?",
        "Were both and founded in ? Which was founded in , or ?",
    ]).lower().split()
) | set(KINDS) | set(NOUNS) | set(ADJECTIVES))


@dataclass
class Article:
    name: str
    kind: str
    city: str
    year: int
    partner: str
    sentences: List[str]
    city_index: int
    year_index: int
    link_index: int

    def to_paragraph(self) -> Paragraph:
        return Paragraph(
            title=self.name,
            sentences=[Sentence(text=s, tokens=tokenize(s)) for s in self.sentences],
            hyperlinks=[(self.link_index, self.partner)],
        )


def _pseudo_words(rng: np.random.Generator, count: int, lengths: Tuple[int, ...],
                  suffixes: List[str], taken: set) -> List[str]:
    capacity = sum(len(SYLLABLES) ** n for n in lengths) * max(len(suffixes), 1)
    if count > capacity - len(taken):
        raise ConfigError(f"cannot generate {count} distinct names from the syllable inventory")
    words: List[str] = []
    while len(words) < count:
        size = lengths[int(rng.integers(len(lengths)))]
        stem = "".join(SYLLABLES[int(i)] for i in rng.integers(len(SYLLABLES), size=size))
        suffix = suffixes[int(rng.integers(len(suffixes)))] if suffixes else ""
        word = (stem + suffix).capitalize()
        if word not in taken:
            taken.add(word)
            words.append(word)
    return words


class SyntheticWorld:
    def __init__(self, cfg: SynthConfig, rng: np.random.Generator):
        if cfg.sentences_per_paragraph < 3:
            raise ConfigError("sentences_per_paragraph must be at least 3 for the synthetic templates")
        if cfg.num_entities < cfg.distractor_count + 2:
            raise ConfigError(
                f"num_entities={cfg.num_entities} too small for 2 gold + "
                f"{cfg.distractor_count} distractor paragraphs"
            )
        num_cities = max(4, cfg.num_entities // 4)
        required = len(TEMPLATE_WORDS) + cfg.num_entities + num_cities + len(YEARS)
        if cfg.vocab_size < required:
            raise ConfigError(
                f"vocab_size={cfg.vocab_size} too small to generate {cfg.num_entities} "
                f"distinct entities (needs at least {required})"
            )

        taken: set = set()
        names = _pseudo_words(rng, cfg.num_entities, (2, 3), [], taken)
        cities = _pseudo_words(rng, num_cities, (1, 2), CITY_SUFFIXES, taken)
        year_slots = rng.integers(len(YEARS), size=len(names))
        if (year_slots == year_slots[0]).all():
            # comparison questions need two articles with different years
            year_slots[-1] = (year_slots[-1] + 1) % len(YEARS)
        self.articles: Dict[str, Article] = {}
        self.names = names
        for position, name in enumerate(names):
            offset = int(rng.integers(1, len(names)))
            partner = names[(position + offset) % len(names)]
            self.articles[name] = self._article(cfg, rng, name, partner, cities,
                                                YEARS[int(year_slots[position])])
        self.by_year: Dict[int, List[str]] = {}
        for name in names:
            self.by_year.setdefault(self.articles[name].year, []).append(name)

    @staticmethod
    def _article(cfg: SynthConfig, rng: np.random.Generator, name: str, partner: str,
                 cities: List[str], year: int) -> Article:
        kind = KINDS[int(rng.integers(len(KINDS)))]
        city = cities[int(rng.integers(len(cities)))]
        noun = NOUNS[int(rng.integers(len(NOUNS)))]
        keyed = [
            ("city", f"{name} is a {kind} from {city} ."),
            ("year", f"{name} was founded in {year} ."),
            ("link", f"{name} worked with {partner} on {noun} ."),
        ]
        for _ in range(cfg.sentences_per_paragraph - 3):
            template = FILLERS[int(rng.integers(len(FILLERS)))]
            keyed.append(("filler", template.format(
                name=name,
                adj=ADJECTIVES[int(rng.integers(len(ADJECTIVES)))],
                noun=NOUNS[int(rng.integers(len(NOUNS)))],
            )))
        order = rng.permutation(len(keyed))
        ordered = [keyed[int(i)] for i in order]
        slot = {key: i for i, (key, _) in enumerate(ordered) if key != "filler"}
        return Article(
            name=name, kind=kind, city=city, year=year, partner=partner,
            sentences=[text for _, text in ordered],
            city_index=slot["city"], year_index=slot["year"], link_index=slot["link"],
        )

    def distractors(self, rng: np.random.Generator, exclude: List[str], count: int) -> List[Article]:
        pool = [n for n in self.names if n not in exclude]
        picks = rng.choice(len(pool), size=count, replace=False)
        return [self.articles[pool[int(i)]] for i in picks]


def _bridge(world: SyntheticWorld, rng: np.random.Generator) -> Question:
    first = world.articles[world.names[int(rng.integers(len(world.names)))]]
    second = world.articles[first.partner]
    if rng.random() < 0.5:
        question = f"Which city is the partner of {first.name} from ?"
        answer = second.city
        facts = [(first.name, first.link_index), (second.name, second.city_index)]
    else:
        question = f"In which year was the partner of {first.name} founded ?"
        answer = str(second.year)
        facts = [(first.name, first.link_index), (second.name, second.year_index)]
    return question, answer, facts, [first.name, second.name]


def _both_founded_in(world: SyntheticWorld, rng: np.random.Generator) -> Question:
    shared = [group for group in world.by_year.values() if len(group) > 1]
    if shared and rng.random() < 0.5:
        group = shared[int(rng.integers(len(shared)))]
        i, j = rng.choice(len(group), size=2, replace=False)
        first, second = world.articles[group[int(i)]], world.articles[group[int(j)]]
        year = first.year
    else:
        i, j = rng.choice(len(world.names), size=2, replace=False)
        first, second = world.articles[world.names[int(i)]], world.articles[world.names[int(j)]]
        if first.year != second.year and rng.random() < 0.5:
            year = (first.year, second.year)[int(rng.integers(2))]
        else:
            others = [y for y in YEARS if y not in (first.year, second.year)]
            year = others[int(rng.integers(len(others)))]
    answer = "yes" if first.year == second.year == year else "no"
    question = f"Were both {first.name} and {second.name} founded in {year} ?"
    facts = [(first.name, first.year_index), (second.name, second.year_index)]
    return question, answer, facts, [first.name, second.name]


def _which_founded_in(world: SyntheticWorld, rng: np.random.Generator) -> Question:
    first = world.articles[world.names[int(rng.integers(len(world.names)))]]
    # the world always holds at least two founding years
    pool = [name for name in world.names if world.articles[name].year != first.year]
    second = world.articles[pool[int(rng.integers(len(pool)))]]
    target = first if rng.random() < 0.5 else second
    if rng.random() < 0.5:
        first, second = second, first
    question = f"Which was founded in {target.year} , {first.name} or {second.name} ?"
    facts = [(first.name, first.year_index), (second.name, second.year_index)]
    return question, target.name, facts, [first.name, second.name]


def _comparison(world: SyntheticWorld, rng: np.random.Generator) -> Question:
    if rng.random() < 0.5:
        return _both_founded_in(world, rng)
    return _which_founded_in(world, rng)


def generate_synthetic(cfg: SynthConfig) -> List[QAExample]:
    rng = np.random.default_rng(cfg.seed)
    world = SyntheticWorld(cfg, rng)
    examples = []
    for index in range(cfg.num_examples):
        is_bridge = rng.random() < cfg.bridge_fraction
        build = _bridge if is_bridge else _comparison
        question, answer, facts, gold = build(world, rng)
        articles = [world.articles[name] for name in gold]
        articles += world.distractors(rng, gold, cfg.distractor_count)
        order = rng.permutation(len(articles))
        examples.append(QAExample(
            id=f"synth-{cfg.seed}-{index:05d}",
            question=question,
            question_tokens=tokenize(question),
            paragraphs=[articles[int(i)].to_paragraph() for i in order],
            answer=answer,
            supporting_facts=facts,
            qtype=QuestionType.BRIDGE if is_bridge else QuestionType.COMPARISON,
        ))
    logger.info("synthetic_generated", count=len(examples), seed=cfg.seed,
                bridge_fraction=cfg.bridge_fraction)
    return examples
