"""観測CSVの取込と、CSV成果物の書き出し

観測CSV: ヘッダー `x1,...,xD,label` 必須。ラベルは辞書順に並べて語彙にする。
出力CSV: UTF-8、改行LF、浮動小数は有効数字17桁。
"""

import csv
import io
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from gdrf.errors import ConfigError, IngestionError
from gdrf.models.grid import DiscretizationGrid
from gdrf.models.ground_truth import GroundTruth
from gdrf.models.observations import Observations
from gdrf.schemas.world import World

logger = logging.getLogger(__name__)

SECTION_PREFIX = "# section:"
TRUTH_SECTIONS = ("grid", "mu", "phi", "ml_topic_map", "ml_word_map")


@dataclass(frozen=True, eq=False)
class ObservationDataset:
    world: World
    vocabulary: tuple[str, ...]
    observations: Observations

    @property
    def vocab_size(self) -> int:
        return len(self.vocabulary)

    @property
    def dim(self) -> int:
        return self.world.dim


def format_value(value) -> str:
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    if isinstance(value, (np.integer,)):
        return str(int(value))
    return str(value)


def write_csv(path: str | Path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_value(v) for v in row])
    logger.info("wrote %s", path)
    return path


def coordinate_header(dim: int) -> list[str]:
    return [f"x{d + 1}" for d in range(dim)]


def simulated_vocabulary(vocab_size: int) -> tuple[str, ...]:
    """w0, w1, ... をゼロ埋めして辞書順と番号順を一致させる"""
    width = len(str(vocab_size - 1))
    return tuple(f"w{i:0{width}d}" for i in range(vocab_size))


def _parse_header(header: list[str]) -> int:
    names = [h.strip() for h in header]
    dim = len(names) - 1
    if dim < 1 or names[-1] != "label" or names[:-1] != coordinate_header(dim):
        raise IngestionError(
            "header must be x1,...,xD,label",
            lines=[1],
            problems=[f"line 1: got header {','.join(names)!r}"],
        )
    return dim


def _read_text(path: Path) -> str:
    data = path.read_bytes()
    try:
        return data.decode("utf-8")
    except UnicodeDecodeError as exc:
        line_no = data[: exc.start].count(b"\n") + 1
        raise IngestionError(
            f"{path}: not valid UTF-8 ({exc.reason})",
            lines=[line_no],
            problems=[f"line {line_no}: undecodable byte at offset {exc.start}"],
        ) from exc


def ingest_csv(
    path: str | Path,
    world_lo: Sequence[float] | None = None,
    world_hi: Sequence[float] | None = None,
    vocabulary: Sequence[str] | None = None,
) -> ObservationDataset:
    """観測CSVを読み込む（不正な行は全て行番号付きでまとめて報告）

    world_lo / world_hi を省略した次元は観測の最小値・最大値を境界にする。
    vocabulary を渡すとその語彙で番号付けし、未知のラベルはエラーにする。
    """
    path = Path(path)
    if not path.is_file():
        raise IngestionError(f"observation file not found: {path}")

    rows = list(csv.reader(io.StringIO(_read_text(path), newline="")))
    if not rows:
        raise IngestionError(f"{path}: empty file", lines=[1], problems=["line 1: missing header"])
    dim = _parse_header(rows[0])

    coords: list[list[float]] = []
    labels: list[str] = []
    source_lines: list[int] = []
    bad_lines: list[int] = []
    problems: list[str] = []
    for line_no, row in enumerate(rows[1:], start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != dim + 1:
            bad_lines.append(line_no)
            problems.append(f"line {line_no}: expected {dim + 1} fields, got {len(row)}")
            continue
        try:
            point = [float(v) for v in row[:dim]]
        except ValueError:
            bad_lines.append(line_no)
            problems.append(f"line {line_no}: non-numeric coordinate in {row[:dim]}")
            continue
        if not all(math.isfinite(v) for v in point):
            bad_lines.append(line_no)
            problems.append(f"line {line_no}: non-finite coordinate in {row[:dim]}")
            continue
        label = row[dim].strip()
        if not label:
            bad_lines.append(line_no)
            problems.append(f"line {line_no}: empty label")
            continue
        coords.append(point)
        labels.append(label)
        source_lines.append(line_no)

    if bad_lines:
        raise IngestionError(f"{path}: {len(bad_lines)} malformed rows", lines=bad_lines, problems=problems)
    if not labels:
        raise IngestionError(f"{path}: no observations")

    locations = np.array(coords, dtype=np.float64)
    if vocabulary is None:
        vocabulary = tuple(sorted(set(labels)))
        index = {label: i for i, label in enumerate(vocabulary)}
    else:
        vocabulary = tuple(vocabulary)
        index = {label: i for i, label in enumerate(vocabulary)}
        unknown = [i for i, label in enumerate(labels) if label not in index]
        if unknown:
            raise IngestionError(
                f"{path}: {len(unknown)} labels not in the model vocabulary",
                lines=[int(source_lines[i]) for i in unknown],
                problems=[f"line {source_lines[i]}: unknown label {labels[i]!r}" for i in unknown],
            )
    words = np.array([index[label] for label in labels], dtype=np.int64)

    lows = locations.min(axis=0)
    highs = locations.max(axis=0)
    # 全観測が同じ座標の次元は ±0.5 広げる
    flat = highs == lows
    lows = np.where(flat, lows - 0.5, lows)
    highs = np.where(flat, highs + 0.5, highs)
    if world_lo is not None:
        lows = np.asarray(world_lo, dtype=np.float64)
    if world_hi is not None:
        highs = np.asarray(world_hi, dtype=np.float64)
    if len(lows) != dim or len(highs) != dim:
        raise ConfigError(f"world_lo/world_hi need {dim} values to match {path}")
    try:
        world = World.from_arrays(lows, highs)
    except ValueError as exc:
        raise ConfigError(f"invalid world bounds for {path}: {exc}") from exc

    outside = np.flatnonzero(~world.contains(locations))
    if len(outside):
        raise IngestionError(
            f"{path}: {len(outside)} observations outside the world bounds",
            lines=[int(source_lines[i]) for i in outside],
            problems=[f"line {source_lines[i]}: {locations[i].tolist()} out of bounds" for i in outside],
        )

    logger.info("ingested %s: N=%d D=%d W=%d", path, len(words), dim, len(vocabulary))
    return ObservationDataset(world=world, vocabulary=vocabulary, observations=Observations(locations, words))


def write_observations_csv(path: str | Path, observations: Observations, vocabulary: Sequence[str]) -> Path:
    rows = (
        [*loc.tolist(), vocabulary[w]]
        for loc, w in zip(observations.locations, observations.words)
    )
    return write_csv(path, [*coordinate_header(observations.dim), "label"], rows)


def write_map_csv(
    path: str | Path,
    grid: DiscretizationGrid,
    columns: dict[str, Sequence],
) -> Path:
    """セルごとの表（cell, セル中心座標, 任意の列）"""
    centers = grid.cell_centers()
    names = list(columns)
    rows = (
        [c, *centers[c].tolist(), *(columns[name][c] for name in names)]
        for c in range(grid.n_cells)
    )
    return write_csv(path, ["cell", *coordinate_header(grid.dim), *names], rows)


def write_truth(path: str | Path, truth: GroundTruth, vocabulary: Sequence[str]) -> Path:
    """`# section:` 行で区切ったCSVブロックとして真値を書き出す"""
    grid = truth.grid
    n_topics = truth.mu.shape[1]
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")

        def block(name, header, rows):
            f.write(f"{SECTION_PREFIX} {name}\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow([format_value(v) for v in row])

        block(
            "grid",
            ["dim", "lo", "hi", "cells"],
            (
                [d, lo, hi, n]
                for d, ((lo, hi), n) in enumerate(zip(grid.world.bounds, grid.cells_per_dim))
            ),
        )
        block("mu", ["cell", *(f"topic_{j}" for j in range(n_topics))],
              ([c, *truth.mu[c].tolist()] for c in range(grid.n_cells)))
        block("phi", ["topic", *vocabulary], ([j, *truth.phi[j].tolist()] for j in range(n_topics)))
        block("ml_topic_map", ["cell", "topic"],
              ([c, int(t)] for c, t in enumerate(truth.ml_topic_map)))
        block("ml_word_map", ["cell", "word"],
              ([c, vocabulary[int(w)]] for c, w in enumerate(truth.ml_word_map)))
    logger.info("wrote %s", path)
    return path


@dataclass(frozen=True, eq=False)
class TruthFile:
    grid: DiscretizationGrid
    mu: np.ndarray
    phi: np.ndarray
    vocabulary: tuple[str, ...]
    ml_topic_map: np.ndarray
    ml_word_map: np.ndarray


def read_truth(path: str | Path) -> TruthFile:
    path = Path(path)
    if not path.is_file():
        raise IngestionError(f"truth file not found: {path}")
    sections: dict[str, list[list[str]]] = {}
    current = None
    for line_no, line in enumerate(_read_text(path).split("\n"), start=1):
        line = line.rstrip("\r")
        if line.startswith(SECTION_PREFIX):
            current = line[len(SECTION_PREFIX):].strip()
            sections[current] = []
        elif line and current is not None:
            sections[current].append(next(csv.reader([line])))
        elif line:
            raise IngestionError(f"{path}: data before the first section", lines=[line_no])
    missing = [s for s in TRUTH_SECTIONS if s not in sections]
    if missing:
        raise IngestionError(f"{path}: missing sections {', '.join(missing)}")

    try:
        grid_rows = sections["grid"][1:]
        world = World(bounds=tuple((float(r[1]), float(r[2])) for r in grid_rows))
        grid = DiscretizationGrid(world, tuple(int(r[3]) for r in grid_rows))
        mu = np.array([[float(v) for v in r[1:]] for r in sections["mu"][1:]])
        vocabulary = tuple(sections["phi"][0][1:])
        phi = np.array([[float(v) for v in r[1:]] for r in sections["phi"][1:]])
        word_index = {w: i for i, w in enumerate(vocabulary)}
        topic_map = np.array([int(r[1]) for r in sections["ml_topic_map"][1:]], dtype=np.int64)
        word_map = np.array([word_index[r[1]] for r in sections["ml_word_map"][1:]], dtype=np.int64)
    except (ValueError, IndexError, KeyError) as exc:
        raise IngestionError(f"{path}: malformed truth file: {exc}") from exc
    if len(topic_map) != grid.n_cells or len(word_map) != grid.n_cells:
        raise IngestionError(f"{path}: maps do not cover the {grid.n_cells} grid cells")
    return TruthFile(
        grid=grid,
        mu=mu,
        phi=phi,
        vocabulary=vocabulary,
        ml_topic_map=topic_map,
        ml_word_map=word_map,
    )
