"""Double-sided Feynman diagrams: the tuple DSL, enumeration and ASCII output.

A diagram is a time-ordered list of interactions, each one of

    Ku  ket excitation      (left-multiply by the raising part of mu)
    Kd  ket de-excitation   (left-multiply by the lowering part)
    Bu  bra excitation      (right-multiply by the lowering part)
    Bd  bra de-excitation   (right-multiply by the raising part)

tagged with the index of the pulse that drives it. Polarization diagrams
end with an implicit ket-side emission that is not written in the DSL;
population (photoluminescence-type) diagrams end in a diagonal state and are
read out directly.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import DiagramParseError, ValidationError

TAGS = ("Ku", "Kd", "Bu", "Bd")

# excitation change (ket, bra) per tag
_STEP = {"Ku": (1, 0), "Kd": (-1, 0), "Bu": (0, 1), "Bd": (0, -1)}
# wavevector sign -> the two ways of absorbing it (ket choice first)
_BY_SIGN = {+1: ("Ku", "Bd"), -1: ("Kd", "Bu")}

POLARIZATION = "polarization"
POPULATION = "population"


@dataclass(frozen=True)
class Interaction:
    side: str  # "K" or "B"
    direction: str  # "u" or "d"
    pulse_index: int

    def __post_init__(self):
        if self.side not in ("K", "B") or self.direction not in ("u", "d"):
            raise ValidationError(f"bad interaction {self.side}{self.direction}")
        if self.pulse_index < 0:
            raise ValidationError(f"negative pulse index {self.pulse_index}")

    @classmethod
    def from_tag(cls, tag: str, pulse_index: int) -> "Interaction":
        if tag not in _STEP:
            raise ValidationError(f"unknown interaction tag {tag!r}")
        return cls(tag[0], tag[1], int(pulse_index))

    @property
    def tag(self) -> str:
        return self.side + self.direction

    @property
    def wavevector_sign(self) -> int:
        """+1 for Ku/Bd (field e^{+ikr}), -1 for Kd/Bu."""
        return +1 if self.tag in ("Ku", "Bd") else -1


def excitation_path(interactions: Iterable[Interaction]) -> list[tuple[int, int]]:
    """Running (ket, bra) excitation numbers, starting from (0, 0)."""
    ket = bra = 0
    out = [(0, 0)]
    for it in interactions:
        dk, db = _STEP[it.tag]
        ket += dk
        bra += db
        out.append((ket, bra))
    return out


@dataclass(frozen=True)
class Diagram:
    interactions: tuple[Interaction, ...]
    detection: str = POLARIZATION

    def __post_init__(self):
        object.__setattr__(self, "interactions", tuple(self.interactions))
        if self.detection not in (POLARIZATION, POPULATION):
            raise ValidationError(f"unknown detection {self.detection!r}")

    @property
    def sign(self) -> int:
        # each bra-side interaction carries a minus from its commutator
        n_bra = sum(1 for it in self.interactions if it.side == "B")
        return -1 if n_bra % 2 else 1

    @property
    def order(self) -> int:
        return len(self.interactions)

    @property
    def tags(self) -> tuple[str, ...]:
        return tuple(it.tag for it in self.interactions)

    def __len__(self) -> int:
        return len(self.interactions)

    def __str__(self) -> str:
        return to_dsl(self)


def validate(diagram: Diagram, max_level: int | None = None) -> None:
    """Check ladder consistency: no negative excitation and a detectable end."""
    path = excitation_path(diagram.interactions)
    for pos, (ket, bra) in enumerate(path[1:]):
        if ket < 0 or bra < 0:
            side = "ket" if ket < 0 else "bra"
            raise DiagramParseError(
                f"{diagram.interactions[pos].tag} de-excites the {side} below the ground state", pos)
        if max_level is not None and (ket > max_level or bra > max_level):
            raise DiagramParseError(f"excitation exceeds level {max_level}", pos)
    if not diagram.interactions:
        return
    ket, bra = path[-1]
    if diagram.detection == POLARIZATION and ket - bra != 1:
        raise DiagramParseError(
            f"pathway ends in |{ket}><{bra}|; ket emission would not leave a population")
    if diagram.detection == POPULATION and ket != bra:
        raise DiagramParseError(f"pathway ends in coherence |{ket}><{bra}|, not a population")


# -- DSL --------------------------------------------------------------------

_TOKEN = re.compile(r"\s*(?:(?P<punct>[(),])|(?P<quoted>['\"`‘’](?P<qtag>\w+)['\"`’‘])|(?P<int>-?\d+)|(?P<word>[A-Za-z]\w*))")


def _tokenize(text: str):
    pos = 0
    tokens = []
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if not m:
            raise DiagramParseError(f"unexpected character {text[pos:].lstrip()[:1]!r}", pos)
        start = m.start() + (len(m.group(0)) - len(m.group(0).lstrip()))
        if m.group("punct"):
            tokens.append(("punct", m.group("punct"), start))
        elif m.group("quoted"):
            tokens.append(("tag", m.group("qtag"), start))
        elif m.group("int"):
            tokens.append(("int", int(m.group("int")), start))
        else:
            tokens.append(("tag", m.group("word"), start))
        pos = m.end()
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0
        self.last_index = 0

    def peek(self):
        return self.tokens[self.i] if self.i < len(self.tokens) else None

    def take(self, kind, value=None):
        tok = self.peek()
        if tok is None:
            raise DiagramParseError(f"unexpected end of input, expected {value or kind}", len(self.text))
        if tok[0] != kind or (value is not None and tok[1] != value):
            raise DiagramParseError(f"expected {value or kind}, found {tok[1]!r}", tok[2])
        self.i += 1
        return tok

    def pair(self) -> tuple[Interaction, int]:
        open_tok = self.take("punct", "(")
        tag = self.take("tag")
        if tag[1] not in _STEP:
            raise DiagramParseError(f"unknown interaction tag {tag[1]!r}", tag[2])
        self.take("punct", ",")
        idx = self.take("int")
        if idx[1] < 0:
            raise DiagramParseError("pulse index must be nonnegative", idx[2])
        if idx[1] < self.last_index:
            raise DiagramParseError(f"pulse index {idx[1]} follows {self.last_index}; indices must not decrease",
                                    idx[2])
        self.last_index = idx[1]
        self.take("punct", ")")
        return Interaction.from_tag(tag[1], idx[1]), open_tok[2]

    def is_pair_start(self) -> bool:
        # "((" or "(tag" decides between the outer list and a bare pair
        tok = self.peek()
        nxt = self.tokens[self.i + 1] if self.i + 1 < len(self.tokens) else None
        return tok is not None and tok[1] == "(" and nxt is not None and nxt[0] == "tag"

    def pairs(self, closing: bool):
        out = []
        while True:
            tok = self.peek()
            if tok is None or (closing and tok[1] == ")"):
                break
            out.append(self.pair())
            tok = self.peek()
            if tok is not None and tok[1] == ",":
                self.i += 1
                continue
            break
        return out

    def parse(self):
        if not self.tokens:
            return []
        if self.is_pair_start():
            items = self.pairs(closing=False)
        else:
            self.take("punct", "(")
            items = self.pairs(closing=True)
            self.take("punct", ")")
        tok = self.peek()
        if tok is not None:
            raise DiagramParseError(f"trailing input {tok[1]!r}", tok[2])
        return items


def parse(text: str, detection: str | None = None, *, strict: bool = True) -> Diagram:
    """Parse ``((Bu,0),(Ku,1),(Bd,2))``-style text into a validated Diagram.

    Tags may be bare or quoted. When ``detection`` is omitted it is inferred
    from the final excitation numbers: one extra ket quantum means a
    polarization diagram (implicit ket emission), equal numbers a population
    readout. An empty list is a polarization diagram with no interactions.
    ``strict=False`` keeps only the ladder-floor check, for pulse sequences
    such as the single bra excitation of a linear response that are read out
    with the full dipole instead of a ket emission.
    """
    items = _Parser(text).parse()
    interactions = tuple(it for it, _ in items)
    path = excitation_path(interactions)
    for k, (ket, bra) in enumerate(path[1:]):
        if ket < 0 or bra < 0:
            side = "ket" if ket < 0 else "bra"
            raise DiagramParseError(
                f"{interactions[k].tag} de-excites the {side} below the ground state", items[k][1])
    if not strict:
        return Diagram(interactions, detection or POLARIZATION)
    if detection is None:
        ket, bra = path[-1]
        if not interactions or ket - bra == 1:
            detection = POLARIZATION
        elif ket == bra:
            detection = POPULATION
        else:
            raise DiagramParseError(
                f"pathway ends in |{ket}><{bra}| which neither ket emission nor a population readout can detect")
    diagram = Diagram(interactions, detection)
    validate(diagram)
    return diagram


def to_dsl(diagram: Diagram) -> str:
    return "(" + ",".join(f"({it.tag},{it.pulse_index})" for it in diagram.interactions) + ")"


# -- enumeration ------------------------------------------------------------

@dataclass(frozen=True)
class PhaseSpec:
    """Per-pulse (n_minus, n_plus) counts of -k and +k interactions."""

    pairs: tuple[tuple[int, int], ...]

    def __post_init__(self):
        pairs = tuple((int(a), int(b)) for a, b in self.pairs)
        if any(a < 0 or b < 0 for a, b in pairs):
            raise ValidationError("interaction counts must be nonnegative")
        object.__setattr__(self, "pairs", pairs)

    @property
    def n_pulses(self) -> int:
        return len(self.pairs)

    @property
    def net(self) -> int:
        return sum(b - a for a, b in self.pairs)

    @property
    def order(self) -> int:
        return sum(a + b for a, b in self.pairs)

    @classmethod
    def parse(cls, text: str) -> "PhaseSpec":
        nums = re.findall(r"\(\s*(\d+)\s*,\s*(\d+)\s*\)", text)
        if not nums:
            raise ValidationError(f"cannot read phase specification {text!r}")
        return cls(tuple((int(a), int(b)) for a, b in nums))


def _orderings(group: list[tuple[int, int]]):
    seen = set()
    for perm in itertools.permutations(group):
        if perm not in seen:
            seen.add(perm)
            yield perm


def generate(phase: PhaseSpec | Sequence[tuple[int, int]], pulse_times: Sequence[float],
             max_manifold: int = 1) -> list[Diagram]:
    """All diagrams matching a phase specification and pulse timing.

    Each +k interaction lands on the ket as Ku or on the bra as Bd; each -k
    interaction as Kd or Bu. A net wavevector of +1 gives polarization
    diagrams (implicit ket emission); net zero gives population readout of
    an excited state; anything else gives no diagrams.

    Excitation numbers on either side may reach ``max_manifold + 1``. The
    extra rung admits the excited-state-absorption coherence third-order
    pathways pass through before emitting, so ``max_manifold=1`` yields all
    six third-order diagrams and ``max_manifold=0`` is a strict two-level
    ladder (four diagrams).

    ``pulse_times`` holds one arrival time per pulse, optionally followed by
    the detection time. Pulses sharing an arrival time contribute every
    relative ordering; orderings that produce the same interaction sequence
    at the same times are merged.
    """
    if not isinstance(phase, PhaseSpec):
        phase = PhaseSpec(tuple(phase))
    times = [float(t) for t in pulse_times]
    n = phase.n_pulses
    if len(times) not in (n, n + 1):
        raise ValidationError(f"expected {n} or {n + 1} arrival times, got {len(times)}")
    if any(b < a for a, b in zip(times, times[1:])):
        raise ValidationError("arrival times must be nondecreasing")
    if max_manifold < 0:
        raise ValidationError("max_manifold must be nonnegative")
    times = times[:n]
    if phase.net == 1:
        detection = POLARIZATION
    elif phase.net == 0:
        detection = POPULATION
    else:
        return []
    top = max_manifold + 1

    # (pulse, sign) interactions grouped by arrival time
    groups: dict[float, list[tuple[int, int]]] = {}
    for p, (n_minus, n_plus) in enumerate(phase.pairs):
        groups.setdefault(times[p], []).extend([(p, -1)] * n_minus + [(p, +1)] * n_plus)
    slots = [groups[t] for t in sorted(groups)]
    slot_time = sorted(groups)

    out: list[Diagram] = []
    seen = set()
    for ordering in itertools.product(*(list(_orderings(g)) for g in slots)):
        sequence = [(p, s, slot_time[k]) for k, grp in enumerate(ordering) for p, s in grp]
        if not sequence:
            continue
        for tags in itertools.product(*(_BY_SIGN[s] for _, s, _ in sequence)):
            ket = bra = 0
            ok = True
            for tag in tags:
                dk, db = _STEP[tag]
                ket += dk
                bra += db
                if ket < 0 or bra < 0 or ket > top or bra > top:
                    ok = False
                    break
            if not ok:
                continue
            if detection == POLARIZATION and ket - bra != 1:
                continue
            if detection == POPULATION and (ket != bra or ket == 0):
                continue
            key = (tags, tuple(t for _, _, t in sequence))
            if key in seen:
                continue
            seen.add(key)
            out.append(Diagram(tuple(Interaction.from_tag(tag, p) for tag, (p, _, _) in zip(tags, sequence)),
                               detection))
    return out


def count_terms(order: int) -> int:
    """Distinct left/right commutator expansions at a given order (conjugate pairs merged)."""
    if order < 1:
        raise ValidationError("order must be >= 1")
    return 2 ** (order - 1)


# -- ASCII ------------------------------------------------------------------

_ARM = 9


def render_ascii(diagram: Diagram) -> str:
    """Ladder picture with time running upward: ket rail left, bra rail right."""
    path = excitation_path(diagram.interactions)
    blank = " " * _ARM
    rail = lambda ket, bra: f"|{ket:^3}{bra:^3}|"  # noqa: E731
    bare = "|" + " " * 6 + "|"
    rows = []
    for k, it in enumerate(diagram.interactions):
        label = f"{it.pulse_index}"
        if it.tag == "Ku":
            left, right = f"{label:>2} ---->", blank
        elif it.tag == "Kd":
            left, right = f"{label:>2} <----", blank
        elif it.tag == "Bu":
            left, right = blank, f"<---- {label:<2}"
        else:
            left, right = blank, f"----> {label:<2}"
        rows.append(f"{left:>{_ARM}}{bare}{right:<{_ARM}}  {it.tag}")
        ket, bra = path[k + 1]
        rows.append(f"{blank}{rail(ket, bra)}{blank}")
    if diagram.interactions and diagram.detection == POLARIZATION:
        rows.append(f"{'<- - - ':>{_ARM}}{bare}{blank}  emission")
        ket, bra = path[-1]
        rows.append(f"{blank}{rail(ket - 1, bra)}{blank}")
    top = [f"{blank}{bare}{blank}"]
    bottom = [f"{blank}{rail(0, 0)}{blank}"] if diagram.interactions else [f"{blank}{bare}{blank}"]
    lines = top + list(reversed(rows)) + bottom
    return "\n".join(line.rstrip() for line in lines) + "\n"
