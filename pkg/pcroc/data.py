"""Game logs, pairwise counts and Ford's connectivity condition."""

from __future__ import annotations

import io
import logging
import re
from dataclasses import dataclass
from pathlib import Path
from types import MappingProxyType
from typing import BinaryIO, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import numpy.typing as npt
import pandas as pd
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .errors import GameLogError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CsvFormat:
    winner_column: str = "winner"
    loser_column: str = "loser"
    date_column: str = "date"
    delimiter: str = ","
    encoding: str = "utf-8-sig"


DEFAULT_FORMAT = CsvFormat()


@dataclass(frozen=True)
class GameRecord:
    winner: str
    loser: str
    date: Optional[str] = None

    def __post_init__(self) -> None:
        if self.winner == self.loser:
            raise ValueError(f"team {self.winner!r} cannot play itself")


@dataclass(frozen=True)
class PairCounts:
    """Aggregated comparisons: ``n[i, j]`` games between i and j, ``w[i, j]`` wins of i over j."""

    teams: Tuple[str, ...]
    n: npt.NDArray[np.int64]
    w: npt.NDArray[np.int64]

    def __post_init__(self) -> None:
        object.__setattr__(self, "n", np.array(self.n, dtype=np.int64))
        object.__setattr__(self, "w", np.array(self.w, dtype=np.int64))
        m = len(self.teams)
        if self.n.shape != (m, m) or self.w.shape != (m, m):
            raise ValueError(f"count matrices must be {m}x{m}")
        if np.any(self.w < 0) or np.any(np.diag(self.n)) or np.any(np.diag(self.w)):
            raise ValueError("counts must be nonnegative with a zero diagonal")
        if not np.array_equal(self.w + self.w.T, self.n):
            raise ValueError("w[i, j] + w[j, i] must equal n[i, j]")
        self.n.setflags(write=False)
        self.w.setflags(write=False)

    @classmethod
    def from_wins(cls, teams: Sequence[str], wins: npt.ArrayLike) -> "PairCounts":
        w = np.array(wins, dtype=np.int64)
        return cls(teams=tuple(teams), n=w + w.T, w=w)

    @property
    def m(self) -> int:
        return len(self.teams)

    @property
    def N(self) -> int:
        return int(np.triu(self.n, 1).sum())

    @property
    def R(self) -> int:
        return self.m * (self.m - 1) // 2

    @property
    def index(self) -> Mapping[str, int]:
        return MappingProxyType({team: i for i, team in enumerate(self.teams)})

    def pairs(self) -> Tuple[npt.NDArray[np.intp], npt.NDArray[np.intp]]:
        """Upper-triangle pairs (i < j) that played at least once."""
        rows, cols = np.triu_indices(self.m, 1)
        played = self.n[rows, cols] > 0
        return rows[played], cols[played]


@dataclass(frozen=True)
class ConnectivityResult:
    ok: bool
    components: Tuple[Tuple[str, ...], ...]
    witness: Tuple[Tuple[str, ...], Tuple[str, ...]] = ((), ())

    def __bool__(self) -> bool:
        return self.ok


@dataclass(frozen=True)
class TeamRecord:
    team: str
    wins: int
    games: int

    @property
    def win_pct(self) -> float:
        return self.wins / self.games if self.games else float("nan")


def _read_frame(source: BinaryIO, fmt: CsvFormat) -> pd.DataFrame:
    """Raw cells with the header as row 0; absent trailing fields come back as NaN."""
    try:
        frame = pd.read_csv(
            source,
            sep=fmt.delimiter,
            header=None,
            index_col=False,
            dtype=str,
            encoding=fmt.encoding,
            keep_default_na=False,
            skip_blank_lines=False,
            skipinitialspace=True,
        )
    except pd.errors.EmptyDataError:
        raise GameLogError("game log is empty", line=1) from None
    except pd.errors.ParserError as exc:
        found = re.search(r"line (\d+)", str(exc))
        line = int(found.group(1)) if found else None
        raise GameLogError(f"malformed row: {str(exc).strip()}", line=line) from None
    except UnicodeDecodeError as exc:
        raise GameLogError(f"game log is not UTF-8 text: {exc}") from None
    return frame


def _fields(row: Sequence[object]) -> List[str]:
    return [str(value).strip() for value in row if not pd.isna(value)]


def load_games(source: BinaryIO, fmt: CsvFormat = DEFAULT_FORMAT) -> List[GameRecord]:
    """Parse a ``winner,loser[,date]`` game log into records in file order.

    Every data row must carry exactly as many fields as the header.
    """
    frame = _read_frame(source, fmt)
    rows = frame.itertuples(index=False, name=None)
    columns = _fields(next(rows))
    expected = [fmt.winner_column, fmt.loser_column]
    allowed = expected + [fmt.date_column]
    if columns[:2] != expected or len(columns) > 3 or any(c not in allowed for c in columns):
        raise GameLogError(
            f"header must be {','.join(expected)}[,{fmt.date_column}], got {','.join(columns)}",
            line=1,
        )
    has_date = fmt.date_column in columns

    games: List[GameRecord] = []
    for offset, row in enumerate(rows):
        line = offset + 2
        cells = _fields(row)
        if not any(cells):
            continue
        if len(cells) != len(columns):
            raise GameLogError(f"expected {len(columns)} fields, found {len(cells)}", line=line)
        winner, loser = cells[0], cells[1]
        if not winner or not loser:
            raise GameLogError("missing team name", line=line)
        if winner == loser:
            raise GameLogError(f"team {winner!r} recorded as playing itself", line=line)
        date = (cells[2] or None) if has_date else None
        games.append(GameRecord(winner=winner, loser=loser, date=date))
    if not games:
        raise GameLogError("game log has no games", line=2)
    logger.info("loaded %d games", len(games))
    return games


def load_games_path(path: Path | str, fmt: CsvFormat = DEFAULT_FORMAT) -> List[GameRecord]:
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise GameLogError(f"cannot read {path}: {exc.strerror}") from None
    return load_games(io.BytesIO(raw), fmt)


def aggregate(games: Sequence[GameRecord], teams: Optional[Sequence[str]] = None) -> PairCounts:
    """Count games and wins per pair; teams are indexed by first appearance unless given."""
    if not games:
        raise GameLogError("cannot aggregate an empty game list")
    index: Dict[str, int] = {}
    if teams is not None:
        index = {team: i for i, team in enumerate(teams)}
        if len(index) != len(teams):
            raise GameLogError("team order lists a team twice")

    def team_index(team: str) -> int:
        if team not in index:
            if teams is not None:
                raise GameLogError(f"team {team!r} is not in the given team order")
            index[team] = len(index)
        return index[team]

    winners = []
    losers = []
    for game in games:
        winners.append(team_index(game.winner))
        losers.append(team_index(game.loser))

    m = len(index)
    w = np.zeros((m, m), dtype=np.int64)
    np.add.at(w, (np.array(winners), np.array(losers)), 1)
    ordered = sorted(index, key=index.__getitem__)
    return PairCounts(teams=tuple(ordered), n=w + w.T, w=w)


def check_connectivity(counts: PairCounts) -> ConnectivityResult:
    """Ford's condition: the win digraph (edge i -> j when i beat j) is strongly connected."""
    if counts.m < 2:
        raise ValueError("connectivity needs at least two teams")
    graph = csr_matrix(counts.w > 0)
    n_components, labels = connected_components(graph, directed=True, connection="strong")
    teams = np.array(counts.teams, dtype=object)
    components = tuple(tuple(teams[labels == k]) for k in range(n_components))
    if n_components == 1:
        return ConnectivityResult(ok=True, components=components)

    # a component nobody outside ever beat is a violating partition
    beaten_from_outside = np.zeros(n_components, dtype=bool)
    winners, losers = np.nonzero(counts.w)
    crossing = labels[winners] != labels[losers]
    beaten_from_outside[labels[losers[crossing]]] = True
    source = int(np.flatnonzero(~beaten_from_outside)[0])
    strong = components[source]
    rest = tuple(team for team in counts.teams if team not in strong)
    return ConnectivityResult(ok=False, components=components, witness=(strong, rest))


def team_records(counts: PairCounts) -> List[TeamRecord]:
    wins = counts.w.sum(axis=1)
    games = counts.n.sum(axis=1)
    return [
        TeamRecord(team=team, wins=int(wins[i]), games=int(games[i]))
        for i, team in enumerate(counts.teams)
    ]
