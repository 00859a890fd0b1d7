"""On-disk formats: recordings, phase markers, questionnaire answers, result tables.

All files are UTF-8 CSV with LF line endings and `.` as the decimal
separator. Recordings are time-major (one row per sample) behind a two-line
header; reals are written with 17 significant digits so a read after a write
reproduces the exact float64 values.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import (
    PHASE_ORDER,
    REGION_ORDER,
    BandSet,
    Montage,
    Phase,
    PhaseMarkers,
    Recording,
    Region,
    default_bands,
    validate_recording,
)
from .stats import (
    KwResult,
    OmnibusResults,
    OmnibusRow,
    PairwiseResult,
    PairwiseRow,
    RegressionResult,
    RegressionRow,
)
from .teq import N_ITEMS, TeqResponse

FLOAT_FMT = "%.17g"


class DataError(ValueError):
    """A file failed to parse or violated a format rule."""


# ---------------------------------------------------------------------------
# recordings


def write_recording(recording: Recording, path: str | Path) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# sample_rate_hz={recording.sample_rate_hz:.17g}\n")
        fh.write(",".join(recording.channels) + "\n")
        np.savetxt(fh, recording.data.T, fmt=FLOAT_FMT, delimiter=",", newline="\n")


def read_recording(
    path: str | Path,
    band_set: BandSet | None = None,
    participant_id: str | None = None,
) -> Recording:
    """Load a time-major recording CSV and validate it.

    The header is `# sample_rate_hz=<rate>` followed by a channel-label line.
    Parse problems are reported with their line number; a recording that fails
    validation (non-finite sample, band edge above Nyquist) fails the load.
    """
    path = Path(path)
    if band_set is None:
        band_set = default_bands()
    with path.open("r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if not header.startswith("# sample_rate_hz="):
            raise DataError(f"{path.name}: malformed header line 1: {header!r}")
        try:
            rate = float(header.split("=", 1)[1])
        except ValueError as exc:
            raise DataError(f"{path.name}: malformed header line 1: {exc}") from exc
        channel_line = fh.readline().strip()
        if not channel_line:
            raise DataError(f"{path.name}: missing channel labels on line 2")
        channels = tuple(label.strip() for label in channel_line.split(","))
        rows: list[list[float]] = []
        for lineno, line in enumerate(fh, start=3):
            line = line.strip()
            if not line:
                continue
            fields = line.split(",")
            if len(fields) != len(channels):
                raise DataError(
                    f"{path.name}: ragged row at line {lineno}: expected "
                    f"{len(channels)} values, got {len(fields)}"
                )
            try:
                rows.append([float(v) for v in fields])
            except ValueError:
                raise DataError(
                    f"{path.name}: unparsable number at line {lineno}"
                ) from None
    if not rows:
        raise DataError(f"{path.name}: no sample rows")
    data = np.array(rows, dtype=np.float64).T
    recording = Recording(
        sample_rate_hz=rate,
        channels=channels,
        data=data,
        participant_id=participant_id if participant_id is not None else path.stem,
    )
    violations = validate_recording(recording, band_set)
    if violations:
        raise DataError(f"{path.name}: " + "; ".join(str(v) for v in violations[:5]))
    return recording


# ---------------------------------------------------------------------------
# phase markers


def write_markers(markers: PhaseMarkers, path: str | Path) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        fh.write("phase,start_sample,end_sample\n")
        for phase in PHASE_ORDER:
            start, end = markers.span(phase)
            fh.write(f"{phase.value},{start},{end}\n")


def read_markers(path: str | Path, recording: Recording) -> PhaseMarkers:
    """Load `phase,start_sample,end_sample` rows and validate them against a recording."""
    path = Path(path)
    spans: dict[Phase, tuple[int, int]] = {}
    with path.open("r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header.replace(" ", "") != "phase,start_sample,end_sample":
            raise DataError(f"{path.name}: malformed header: {header!r}")
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            fields = line.split(",")
            if len(fields) != 3:
                raise DataError(f"{path.name}: malformed row at line {lineno}")
            try:
                phase = Phase(fields[0].strip())
            except ValueError:
                raise DataError(
                    f"{path.name}: unknown phase {fields[0]!r} at line {lineno}"
                ) from None
            if phase in spans:
                raise DataError(f"{path.name}: duplicate phase {phase.value} at line {lineno}")
            try:
                start, end = int(fields[1]), int(fields[2])
            except ValueError:
                raise DataError(
                    f"{path.name}: unparsable sample index at line {lineno}"
                ) from None
            spans[phase] = (start, end)
    try:
        markers = PhaseMarkers(spans)
        markers.validate_within(recording)
    except ValueError as exc:
        raise DataError(f"{path.name}: {exc}") from exc
    return markers


# ---------------------------------------------------------------------------
# questionnaire answers


def write_teq(responses: list[TeqResponse], path: str | Path) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        fh.write("participant_id," + ",".join(f"item{i}" for i in range(1, N_ITEMS + 1)) + "\n")
        for resp in responses:
            fh.write(resp.participant_id + "," + ",".join(resp.items) + "\n")


def read_teq(path: str | Path) -> list[TeqResponse]:
    """Load one questionnaire row per participant: an id plus 16 answer labels."""
    path = Path(path)
    out: list[TeqResponse] = []
    with path.open("r", encoding="utf-8") as fh:
        header = fh.readline()
        if not header.lower().startswith("participant_id"):
            raise DataError(f"{path.name}: malformed header: {header.strip()!r}")
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            fields = [f.strip() for f in line.split(",")]
            pid, items = fields[0], fields[1:]
            if len(items) != N_ITEMS:
                raise DataError(
                    f"{path.name}: expected {N_ITEMS} items, got {len(items)} at line {lineno}"
                )
            try:
                out.append(TeqResponse(pid, tuple(items)))
            except ValueError as exc:
                raise DataError(f"{path.name}: line {lineno}: {exc}") from exc
    return out


# ---------------------------------------------------------------------------
# dataset manifest


@dataclass(frozen=True)
class ManifestEntry:
    participant_id: str
    recording_path: Path
    markers_path: Path
    teq_path: Path


@dataclass(frozen=True)
class DatasetManifest:
    """Participant file listing plus optional band-set and montage overrides."""

    entries: tuple[ManifestEntry, ...]
    band_set: BandSet | None = None
    montage: Montage | None = None

    def __post_init__(self) -> None:
        ids = [e.participant_id for e in self.entries]
        if len(set(ids)) != len(ids):
            raise ValueError("participant ids in manifest must be unique")

    def data_files(self) -> list[Path]:
        files: list[Path] = []
        for e in self.entries:
            files.extend([e.recording_path, e.markers_path, e.teq_path])
        return files


def load_manifest(path: str | Path) -> DatasetManifest:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"{path.name}: invalid JSON: {exc}") from exc
    root = path.parent
    entries = []
    for item in doc.get("participants", []):
        entries.append(
            ManifestEntry(
                participant_id=item["participant_id"],
                recording_path=root / item["recording"],
                markers_path=root / item["markers"],
                teq_path=root / item["teq"],
            )
        )
    try:
        manifest = DatasetManifest(
            entries=tuple(entries),
            band_set=BandSet.from_jsonable(doc["band_set"]) if doc.get("band_set") else None,
            montage=Montage.from_jsonable(doc["montage"]) if doc.get("montage") else None,
        )
    except ValueError as exc:
        raise DataError(f"{path.name}: {exc}") from exc
    missing = [str(p) for p in manifest.data_files() if not p.exists()]
    if missing:
        raise DataError(f"{path.name}: referenced files do not exist: {missing[:5]}")
    return manifest


def write_manifest(manifest: DatasetManifest, path: str | Path) -> None:
    path = Path(path)
    root = path.parent
    doc = {
        "participants": [
            {
                "participant_id": e.participant_id,
                "recording": e.recording_path.name if e.recording_path.parent == root else str(e.recording_path),
                "markers": e.markers_path.name if e.markers_path.parent == root else str(e.markers_path),
                "teq": e.teq_path.name if e.teq_path.parent == root else str(e.teq_path),
            }
            for e in manifest.entries
        ],
        "band_set": manifest.band_set.to_jsonable() if manifest.band_set else None,
        "montage": manifest.montage.to_jsonable() if manifest.montage else None,
    }
    path.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# result tables


def format_p(p: float) -> str:
    """Three decimals, `<.001` below that threshold, no leading zero."""
    if p < 0.001:
        return "<.001"
    text = f"{p:.3f}"
    return text[1:] if text.startswith("0") else text


def _comparison_label(a: Phase, b: Phase) -> str:
    return f"{a.value}_vs_{b.value}"


@dataclass(frozen=True)
class AnalysisResults:
    """Everything the statistics stage produced, ready for serialization."""

    omnibus: OmnibusResults
    regression: tuple[RegressionRow, ...]
    phi_n_mode: str
    wilcoxon: str


def _hash_line(config_hash: str) -> str:
    return f"# config_hash={config_hash}\n"


def write_results(results: AnalysisResults, out_dir: str | Path, config_hash: str) -> dict[str, Path]:
    """Write the omnibus, pairwise and regression tables plus a JSON mirror.

    CSV cells follow the reporting convention (statistics to three decimals,
    p as `.xxx` or `<.001`); the JSON mirror keeps full precision and
    round-trips to the in-memory results.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths: dict[str, Path] = {}

    omnibus_path = out_dir / "omnibus.csv"
    with omnibus_path.open("w", encoding="utf-8", newline="\n") as fh:
        fh.write(_hash_line(config_hash))
        fh.write("region,band,n,h,df,p,phi\n")
        for row in results.omnibus.omnibus:
            fh.write(
                f"{row.region.value},{row.band},{row.phi_n},{row.kw.h:.3f},"
                f"{row.kw.df},{format_p(row.kw.p)},{row.phi:.3f}\n"
            )
    paths["omnibus"] = omnibus_path

    pairwise_path = out_dir / "pairwise.csv"
    with pairwise_path.open("w", encoding="utf-8", newline="\n") as fh:
        fh.write(_hash_line(config_hash))
        fh.write(
            "region,band,comparison,signed_rank_w,signed_rank_p,rank_sum_u,rank_sum_p\n"
        )
        for row in results.omnibus.pairwise:
            sr_w = f"{row.signed_rank.statistic:.1f}" if row.signed_rank else ""
            sr_p = format_p(row.signed_rank.p) if row.signed_rank else ""
            rs_u = f"{row.rank_sum.statistic:.1f}" if row.rank_sum else ""
            rs_p = format_p(row.rank_sum.p) if row.rank_sum else ""
            fh.write(
                f"{row.region.value},{row.band},{_comparison_label(row.phase_a, row.phase_b)},"
                f"{sr_w},{sr_p},{rs_u},{rs_p}\n"
            )
    paths["pairwise"] = pairwise_path

    regression_path = out_dir / "regression.csv"
    with regression_path.open("w", encoding="utf-8", newline="\n") as fh:
        fh.write(_hash_line(config_hash))
        fh.write(
            "predictor,intercept,slope,standardized_slope,t,df,p,n_used,"
            "cooks_cutoff,n_excluded\n"
        )
        for row in results.regression:
            r = row.result
            fh.write(
                f"{row.predictor},{r.intercept:.3f},{r.slope:.3f},"
                f"{r.standardized_slope:.3f},{r.t:.3f},{r.df},{format_p(r.p)},"
                f"{r.n_used},{row.cutoff:.6g},{len(r.excluded_indices)}\n"
            )
    paths["regression"] = regression_path

    json_path = out_dir / "results.json"
    doc = results_to_jsonable(results)
    doc["config_hash"] = config_hash
    json_path.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    paths["json"] = json_path
    return paths


def results_to_jsonable(results: AnalysisResults) -> dict:
    def pw(res: PairwiseResult | None) -> dict | None:
        if res is None:
            return None
        return {
            "statistic": res.statistic,
            "p": res.p,
            "method": res.method,
            "exact": res.exact,
            "n": res.n,
            "degenerate": res.degenerate,
        }

    return {
        "alpha": results.omnibus.alpha,
        "phi_n_mode": results.phi_n_mode,
        "wilcoxon": results.wilcoxon,
        "omnibus": [
            {
                "region": row.region.value,
                "band": row.band,
                "h": row.kw.h,
                "df": row.kw.df,
                "p": row.kw.p,
                "group_sizes": list(row.kw.group_sizes),
                "phi": row.phi,
                "phi_n": row.phi_n,
            }
            for row in results.omnibus.omnibus
        ],
        "pairwise": [
            {
                "region": row.region.value,
                "band": row.band,
                "phase_a": row.phase_a.value,
                "phase_b": row.phase_b.value,
                "signed_rank": pw(row.signed_rank),
                "rank_sum": pw(row.rank_sum),
            }
            for row in results.omnibus.pairwise
        ],
        "regression": [
            {
                "predictor": row.predictor,
                "participants": list(row.participants),
                "x": list(row.x),
                "y": list(row.y),
                "cutoff": row.cutoff,
                "intercept": row.result.intercept,
                "slope": row.result.slope,
                "standardized_slope": row.result.standardized_slope,
                "t": row.result.t,
                "df": row.result.df,
                "p": row.result.p,
                "n_used": row.result.n_used,
                "excluded_indices": list(row.result.excluded_indices),
                "cooks_distances": list(row.result.cooks_distances),
                "perfect_fit": row.result.perfect_fit,
            }
            for row in results.regression
        ],
    }


def results_from_jsonable(doc: dict) -> AnalysisResults:
    def pw(d: dict | None) -> PairwiseResult | None:
        if d is None:
            return None
        return PairwiseResult(
            statistic=d["statistic"],
            p=d["p"],
            method=d["method"],
            exact=d["exact"],
            n=d["n"],
            degenerate=d["degenerate"],
        )

    omnibus_rows = tuple(
        OmnibusRow(
            region=Region(d["region"]),
            band=d["band"],
            kw=KwResult(
                h=d["h"], df=d["df"], p=d["p"], group_sizes=tuple(d["group_sizes"])
            ),
            phi=d["phi"],
            phi_n=d["phi_n"],
        )
        for d in doc["omnibus"]
    )
    pairwise_rows = tuple(
        PairwiseRow(
            region=Region(d["region"]),
            band=d["band"],
            phase_a=Phase(d["phase_a"]),
            phase_b=Phase(d["phase_b"]),
            signed_rank=pw(d["signed_rank"]),
            rank_sum=pw(d["rank_sum"]),
        )
        for d in doc["pairwise"]
    )
    regression_rows = tuple(
        RegressionRow(
            predictor=d["predictor"],
            participants=tuple(d["participants"]),
            x=tuple(d["x"]),
            y=tuple(d["y"]),
            cutoff=d["cutoff"],
            result=RegressionResult(
                intercept=d["intercept"],
                slope=d["slope"],
                standardized_slope=d["standardized_slope"],
                t=d["t"],
                df=d["df"],
                p=d["p"],
                n_used=d["n_used"],
                excluded_indices=tuple(d["excluded_indices"]),
                cooks_distances=tuple(d["cooks_distances"]),
                perfect_fit=d["perfect_fit"],
            ),
        )
        for d in doc["regression"]
    )
    return AnalysisResults(
        omnibus=OmnibusResults(omnibus_rows, pairwise_rows, doc["alpha"]),
        regression=regression_rows,
        phi_n_mode=doc["phi_n_mode"],
        wilcoxon=doc["wilcoxon"],
    )


def read_results_json(path: str | Path) -> AnalysisResults:
    return results_from_jsonable(json.loads(Path(path).read_text(encoding="utf-8")))
