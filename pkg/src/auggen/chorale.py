"""Four-voice chorale domain types on a sixteenth-note grid.

A chorale is four equal-length token sequences, ordered soprano, alto,
tenor, bass, with one token per voice per sixteenth-note timestep. A token
is one of

* an ``int`` MIDI pitch in 0..127 -- a note onset,
* :data:`HOLD` -- the previous note in the same voice keeps sounding,
* :data:`REST` -- the voice is silent.

A hold can only extend a note: it is invalid at timestep 0 and directly
after a rest. The wire format is one JSON object per line, pitches written
as decimal strings::

    {"id": "c-0001", "voices": [["60", "__", "R", ...], ...]}

All values here are immutable and all operations are pure, so they can be
shared freely across parallel workers.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

HOLD = "__"
REST = "R"
SILENT = -1  # realized-grid pitch value where no note sounds

N_VOICES = 4
VOICE_NAMES = ("soprano", "alto", "tenor", "bass")
MIN_PITCH = 0
MAX_PITCH = 127

Token = int | str


class ChoraleFormatError(ValueError):
    """Malformed chorale record, with the offending line/field when known."""

    def __init__(self, message: str, *, line: int | None = None, field: str | None = None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)
        self.line = line
        self.field = field


class InvalidChoraleError(ValueError):
    """Raised by operations whose precondition is a valid chorale."""

    def __init__(self, chorale_id: str, violations: list[str]):
        super().__init__(f"invalid chorale {chorale_id!r}: " + "; ".join(violations))
        self.chorale_id = chorale_id
        self.violations = tuple(violations)


@dataclass(frozen=True)
class Chorale:
    """Immutable chorale; construction coerces voices to nested tuples.

    Construction does not enforce the grammar invariants -- use
    :func:`validate` to obtain violations, or :func:`realize`, which raises
    on an invalid chorale.
    """

    id: str
    voices: tuple[tuple[Token, ...], ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "voices", tuple(tuple(v) for v in self.voices))

    @property
    def length(self) -> int:
        return len(self.voices[0]) if self.voices else 0


@dataclass(frozen=True)
class RealizedGrid:
    """Sounding pitch and onset flag per voice per timestep.

    ``pitches[v, t]`` is the MIDI pitch sounding in voice ``v`` at timestep
    ``t`` (holds carry the most recent note) or :data:`SILENT`;
    ``onsets[v, t]`` is True exactly where a note token occurs.
    """

    pitches: np.ndarray  # (N_VOICES, T) int16
    onsets: np.ndarray  # (N_VOICES, T) bool

    @property
    def length(self) -> int:
        return self.pitches.shape[1]


def validate(chorale: Chorale) -> list[str]:
    """Return all invariant violations, each naming voice and timestep.

    An empty list means the chorale is valid.
    """
    violations: list[str] = []
    voices = chorale.voices
    if len(voices) != N_VOICES:
        violations.append(f"expected {N_VOICES} voices, got {len(voices)}")
        return violations
    length = len(voices[0])
    if length < 1:
        violations.append("voices must have at least 1 timestep")
        return violations
    for v, voice in enumerate(voices):
        if len(voice) != length:
            violations.append(f"voice {v}: length {len(voice)} != voice 0 length {length}")
    if violations:
        return violations
    for v, voice in enumerate(voices):
        for t, tok in enumerate(voice):
            if isinstance(tok, bool):
                violations.append(f"voice {v}: unknown token {tok!r} at timestep {t}")
            elif isinstance(tok, int):
                if not MIN_PITCH <= tok <= MAX_PITCH:
                    violations.append(f"voice {v}: pitch {tok} out of range at timestep {t}")
            elif tok == HOLD:
                if t == 0:
                    violations.append(f"voice {v}: HOLD at timestep 0")
                elif voice[t - 1] == REST:
                    violations.append(f"voice {v}: HOLD after REST at timestep {t}")
            elif tok != REST:
                violations.append(f"voice {v}: unknown token {tok!r} at timestep {t}")
    return violations


def realize(chorale: Chorale) -> RealizedGrid:
    """Expand tokens into sounding pitches and onset flags.

    Raises :class:`InvalidChoraleError` if the chorale is invalid.
    """
    violations = validate(chorale)
    if violations:
        raise InvalidChoraleError(chorale.id, violations)
    length = chorale.length
    pitches = np.full((N_VOICES, length), SILENT, dtype=np.int16)
    onsets = np.zeros((N_VOICES, length), dtype=bool)
    for v, voice in enumerate(chorale.voices):
        sounding = SILENT
        for t, tok in enumerate(voice):
            if tok == REST:
                sounding = SILENT
            elif tok != HOLD:
                sounding = tok
                onsets[v, t] = True
            pitches[v, t] = sounding
    pitches.setflags(write=False)
    onsets.setflags(write=False)
    return RealizedGrid(pitches=pitches, onsets=onsets)


def tokens_from_grid(grid: RealizedGrid) -> tuple[tuple[Token, ...], ...]:
    """Inverse of :func:`realize`: first timestep of each sustained run is a note."""
    voices = []
    for v in range(grid.pitches.shape[0]):
        voice: list[Token] = []
        for t in range(grid.length):
            pitch = int(grid.pitches[v, t])
            if grid.onsets[v, t]:
                voice.append(pitch)
            elif pitch == SILENT:
                voice.append(REST)
            else:
                voice.append(HOLD)
        voices.append(tuple(voice))
    return tuple(voices)


def token_to_str(tok: Token) -> str:
    if isinstance(tok, int) and not isinstance(tok, bool):
        return str(tok)
    if tok in (HOLD, REST):
        return tok
    raise ValueError(f"unknown token {tok!r}")


def token_from_str(text: str, *, line: int | None = None, field: str | None = None) -> Token:
    if text == HOLD or text == REST:
        return text
    if not text.isdigit():
        raise ChoraleFormatError(f"unknown token {text!r}", line=line, field=field)
    pitch = int(text)
    if not MIN_PITCH <= pitch <= MAX_PITCH:
        raise ChoraleFormatError(f"pitch {pitch} out of range 0..127", line=line, field=field)
    return pitch


def canonical_key(chorale: Chorale) -> str:
    """Canonical uniqueness key: the token sequences, id excluded.

    Two chorales get equal keys iff their token sequences are identical;
    transpositions and other musical equivalences count as distinct.
    """
    return "|".join(",".join(token_to_str(tok) for tok in voice) for voice in chorale.voices)


def serialize_chorale(chorale: Chorale) -> str:
    """One-line JSON record; ``parse_chorale`` inverts it exactly."""
    record = {
        "id": chorale.id,
        "voices": [[token_to_str(tok) for tok in voice] for voice in chorale.voices],
    }
    return json.dumps(record, separators=(",", ":"))


def parse_chorale(text: str, *, line: int | None = None) -> Chorale:
    """Parse one record line; raises :class:`ChoraleFormatError` on bad input."""
    try:
        record = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ChoraleFormatError(f"not valid JSON: {exc.msg}", line=line) from exc
    if not isinstance(record, dict):
        raise ChoraleFormatError("record must be a JSON object", line=line)
    if "id" not in record or not isinstance(record["id"], str):
        raise ChoraleFormatError("missing or non-string 'id'", line=line, field="id")
    if "voices" not in record or not isinstance(record["voices"], list):
        raise ChoraleFormatError("missing or non-list 'voices'", line=line, field="voices")
    raw_voices = record["voices"]
    if len(raw_voices) != N_VOICES:
        raise ChoraleFormatError(
            f"expected {N_VOICES} voices, got {len(raw_voices)}", line=line, field="voices"
        )
    voices = []
    for v, raw_voice in enumerate(raw_voices):
        if not isinstance(raw_voice, list):
            raise ChoraleFormatError("voice must be a list", line=line, field=f"voices[{v}]")
        voice = []
        for t, raw_tok in enumerate(raw_voice):
            field = f"voices[{v}][{t}]"
            if not isinstance(raw_tok, str):
                raise ChoraleFormatError(f"token must be a string, got {raw_tok!r}", line=line, field=field)
            voice.append(token_from_str(raw_tok, line=line, field=field))
        voices.append(tuple(voice))
    chorale = Chorale(id=record["id"], voices=tuple(voices))
    violations = validate(chorale)
    if violations:
        raise ChoraleFormatError(f"invalid chorale {chorale.id!r}: {violations[0]}", line=line)
    return chorale


def transpose(chorale: Chorale, semitones: int) -> Chorale:
    """Shift every pitch by ``semitones``; holds and rests are unchanged."""
    voices = []
    for voice in chorale.voices:
        shifted: list[Token] = []
        for tok in voice:
            if isinstance(tok, int):
                pitch = tok + semitones
                if not MIN_PITCH <= pitch <= MAX_PITCH:
                    raise ValueError(f"transposition by {semitones} puts pitch {tok} out of range")
                shifted.append(pitch)
            else:
                shifted.append(tok)
        voices.append(tuple(shifted))
    return Chorale(id=chorale.id, voices=tuple(voices))
