"""Labeled channel-estimation datasets: generation, serialization, split, load.

File pair per dataset: `<name>.header.json` (UTF-8 JSON, canonical key
order) and `<name>.records.bin`.  The payload is little-endian 32-bit
floats, record-major, with complex matrices stored row-major and
real/imag interleaved per entry.  One record is, in float32 slots:

    y_block     2*M*Q2   received sub-frame (M x Q2 complex)
    h_label_ls  2*M*S    LS estimate used as the training label
    h_true      2*M*S    ground-truth sub-block channel (evaluation only)
    snr_db      1
    scenario_id 1        global record index (exact in float32)
    block_id    1        sub-block index within the partition
    user_id     1

Prediction files reuse the same conventions with records of
h_pred (2*M*S) + the three id slots, so a trained model's output can be
scored against the dataset it was generated from.

SNR is defined as mean per-antenna received signal power over the receiver
noise variance; the receiver noise is re-derived per record from the drawn
SNR while the surface amplification noise stays at its configured value.
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass

import numpy as np

from .airlink import amplification_gain, design_pilots, synthesize_rx_subframe
from .channels import block_permutation, ff_channel_g, nf_channel
from .estimators import ls_block
from .sysmodel import (
    BlockPlan,
    ScenarioConfig,
    SystemConfig,
    draw_placement,
    draw_surface_link_angles,
    rng_stream,
    sample_path_gain,
    validate_plan,
)

SCHEMA_VERSION = "fieldlab.dataset.v1"
PREDICTION_SCHEMA_VERSION = "fieldlab.predictions.v1"
SNR_DEFINITION = "mean per-antenna signal power over receiver noise variance"


class DatasetFormatError(Exception):
    """Header/payload inconsistency: version, digest, truncation, shape."""


@dataclass
class DatasetHeader:
    schema_version: str
    m: int
    s: int
    q2: int
    record_count: int
    split_tag: str
    base_seed: int
    config_digest: str
    snr_definition: str = SNR_DEFINITION

    def record_floats(self) -> int:
        return 2 * self.m * self.q2 + 4 * self.m * self.s + 4


@dataclass
class DatasetRecord:
    y_block: np.ndarray
    h_label_ls: np.ndarray
    h_true: np.ndarray
    snr_db: float
    scenario_id: int
    block_id: int
    user_id: int


@dataclass
class RecordBatch:
    """Column-stacked view of many records plus their header."""

    header: DatasetHeader
    y_block: np.ndarray
    h_label_ls: np.ndarray
    h_true: np.ndarray
    snr_db: np.ndarray
    scenario_id: np.ndarray
    block_id: np.ndarray
    user_id: np.ndarray

    def __len__(self) -> int:
        return self.y_block.shape[0]

    def record(self, i: int) -> DatasetRecord:
        return DatasetRecord(
            y_block=self.y_block[i], h_label_ls=self.h_label_ls[i],
            h_true=self.h_true[i], snr_db=float(self.snr_db[i]),
            scenario_id=int(self.scenario_id[i]), block_id=int(self.block_id[i]),
            user_id=int(self.user_id[i]))


def _interleave(z: np.ndarray) -> np.ndarray:
    flat = np.asarray(z).reshape(-1)
    out = np.empty(2 * flat.size, dtype="<f4")
    out[0::2] = flat.real
    out[1::2] = flat.imag
    return out


def _deinterleave(row: np.ndarray, shape: tuple) -> np.ndarray:
    data = np.asarray(row, dtype=np.float64).reshape(-1)
    return (data[0::2] + 1j * data[1::2]).reshape(shape)


def _resolve_pair(files) -> tuple:
    """Accept a base path, a header path, or an explicit (header, bin) pair."""
    if isinstance(files, (tuple, list)):
        header_path, bin_path = files
        return str(header_path), str(bin_path)
    base = str(files)
    if base.endswith(".header.json"):
        base = base[: -len(".header.json")]
    elif base.endswith(".records.bin"):
        base = base[: -len(".records.bin")]
    return base + ".header.json", base + ".records.bin"


def _write_header(path: str, header: DatasetHeader) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(asdict(header), fh, sort_keys=True, indent=2)
        fh.write("\n")


def _read_header(path: str) -> DatasetHeader:
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    if raw.get("schema_version") != SCHEMA_VERSION:
        raise DatasetFormatError(
            f"unsupported dataset schema {raw.get('schema_version')!r}")
    return DatasetHeader(**raw)


def record_stream(cfg: SystemConfig, scenario: ScenarioConfig, plan: BlockPlan,
                  count: int, seed: int):
    """Yield (DatasetRecord, side-info) pairs, deterministically per seed.

    Per user a dedicated substream drives, in fixed order per record: the
    device placement, the surface-link geometry, the SNR pick, and the frame
    noise seed.  The side-info dict (sub-block surface matrix, amplification
    factor, per-record receiver noise, shared pilot frame) is what the
    record's LS error statistics are conditioned on; generation discards it,
    distribution checks consume it.
    """
    validate_plan(cfg, plan)
    if count < 1:
        raise ValueError("need at least one record per user")
    s = plan.s_total
    if cfg.q2 < s:
        raise ValueError(f"q2={cfg.q2} shorter than the sub-block size {s}")
    frame = design_pilots(s, cfg.q2, seed)
    perm = block_permutation(cfg, plan)
    power_k = cfg.total_power_w / plan.k_total
    scale = np.sqrt(cfg.beta * power_k)
    for user in range(cfg.p_users):
        rng = rng_stream(seed, "dataset", user)
        for i in range(count):
            placement = draw_placement(cfg, scenario, rng)
            bs_az, bs_el, irs_az, irs_el = draw_surface_link_angles(scenario, rng)
            eta_g = sample_path_gain(rng, scenario.d_g_m, cfg.wavelength_m,
                                     scenario.path_exponent)
            snr_db = float(scenario.snr_grid_db[int(rng.integers(len(scenario.snr_grid_db)))])
            frame_seed = int(rng.integers(2**63))

            g = ff_channel_g(cfg, eta_g, bs_az, bs_el, irs_az, irs_el)
            f = nf_channel(placement, cfg, "exact-distance")
            k = i % plan.k_total
            cols = perm[k * s:(k + 1) * s]
            g_k = g.matrix_g[:, cols]
            h_k = g_k * f.vector_f[cols][None, :]
            rho = amplification_gain(cfg.beta, power_k, f.vector_f[cols],
                                     frame.phase_schedule[:, 0], cfg.sigma2_irs_w)
            signal = rho * scale * (h_k @ (frame.phase_schedule
                                           * frame.pilot_symbols[None, :]))
            sig_power = float(np.mean(np.abs(signal) ** 2))
            sigma2_rec = sig_power / 10.0 ** (snr_db / 10.0)
            rx = synthesize_rx_subframe(cfg, plan, k, h_k, g_k, frame, frame_seed,
                                        sigma2_bs_w=sigma2_rec)
            label = ls_block(frame, rx, cfg, plan).h_hat
            record = DatasetRecord(
                y_block=rx.observations, h_label_ls=label, h_true=h_k,
                snr_db=snr_db, scenario_id=user * count + i, block_id=k,
                user_id=user)
            side = {"g_block": g_k, "rho": rho, "sigma2_bs_w": sigma2_rec,
                    "frame": frame}
            yield record, side


def generate_dataset(cfg: SystemConfig, scenario: ScenarioConfig, plan: BlockPlan,
                     count: int, seed: int, out_base: str) -> tuple:
    """Generate `count` records per configured user and write the file pair.

    Returns (header_path, records_path).  Records are written append-ordered
    by record index, so regeneration with the same seed is byte-identical.
    """
    header_path, bin_path = _resolve_pair(out_base)
    os.makedirs(os.path.dirname(os.path.abspath(bin_path)), exist_ok=True)
    total = 0
    with open(bin_path, "wb") as fh:
        for record, _ in record_stream(cfg, scenario, plan, count, seed):
            row = np.concatenate([
                _interleave(record.y_block),
                _interleave(record.h_label_ls),
                _interleave(record.h_true),
                np.array([record.snr_db, record.scenario_id, record.block_id,
                          record.user_id], dtype="<f4"),
            ])
            row.tofile(fh)
            total += 1
    header = DatasetHeader(
        schema_version=SCHEMA_VERSION, m=cfg.m_antennas, s=plan.s_total,
        q2=cfg.q2, record_count=total, split_tag="full", base_seed=int(seed),
        config_digest=cfg.digest())
    _write_header(header_path, header)
    return header_path, bin_path


def _load_matrix(files) -> tuple:
    header_path, bin_path = _resolve_pair(files)
    header = _read_header(header_path)
    flat = np.fromfile(bin_path, dtype="<f4")
    per = header.record_floats()
    if flat.size != header.record_count * per:
        raise DatasetFormatError(
            f"payload holds {flat.size} floats, header implies "
            f"{header.record_count * per}")
    return header, flat.reshape(header.record_count, per)


def load_records(files, record_range: tuple | None = None,
                 expect_digest: str | None = None) -> RecordBatch:
    """Load records [start, stop) into column-stacked arrays.

    Raises DatasetFormatError on schema/digest/truncation problems and
    ValueError on an out-of-range request.
    """
    header, matrix = _load_matrix(files)
    if expect_digest is not None and header.config_digest != expect_digest:
        raise DatasetFormatError("config digest mismatch")
    start, stop = (0, header.record_count) if record_range is None else record_range
    if not 0 <= start <= stop <= header.record_count:
        raise ValueError(f"record range [{start}, {stop}) outside "
                         f"[0, {header.record_count})")
    matrix = matrix[start:stop]
    n = stop - start
    m, s, q2 = header.m, header.s, header.q2
    ofs_label = 2 * m * q2
    ofs_true = ofs_label + 2 * m * s
    ofs_tail = ofs_true + 2 * m * s
    return RecordBatch(
        header=header,
        y_block=_deinterleave(matrix[:, :ofs_label], (n, m, q2)),
        h_label_ls=_deinterleave(matrix[:, ofs_label:ofs_true], (n, m, s)),
        h_true=_deinterleave(matrix[:, ofs_true:ofs_tail], (n, m, s)),
        snr_db=matrix[:, ofs_tail].astype(np.float64),
        scenario_id=matrix[:, ofs_tail + 1].astype(np.int64),
        block_id=matrix[:, ofs_tail + 2].astype(np.int64),
        user_id=matrix[:, ofs_tail + 3].astype(np.int64),
    )


def split_counts(per_user_counts: dict, train_fraction: float) -> dict:
    """Per-user training-record quotas under largest-remainder apportionment.

    The overall training size is round(fraction * total); per-user quotas
    start at floor(fraction * count) and the leftover seats go to the users
    with the largest fractional remainders (ties to the lower user id).
    """
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train_fraction must lie strictly inside (0, 1)")
    total = sum(per_user_counts.values())
    target = int(round(train_fraction * total))
    if target == 0 or target == total:
        raise ValueError("split leaves one side empty")
    base = {u: int(train_fraction * c) for u, c in per_user_counts.items()}
    leftovers = target - sum(base.values())
    order = sorted(per_user_counts,
                   key=lambda u: (-(train_fraction * per_user_counts[u]
                                    - base[u]), u))
    for u in order[:leftovers]:
        base[u] += 1
    if any(base[u] > per_user_counts[u] for u in base):
        raise ValueError("split quota exceeds a user's record count")
    return base


def split_dataset(files, train_fraction: float, out_base: str | None = None) -> tuple:
    """Split one dataset into disjoint, exhaustive train/test file pairs.

    Stratified by user: each user's records are shuffled by a substream of
    the dataset's base seed and its training quota (see `split_counts`) is
    taken from the front, so the split is deterministic for a given file.
    Returns ((train_header, train_bin), (test_header, test_bin)).
    """
    header, matrix = _load_matrix(files)
    per = header.record_floats()
    user_col = matrix[:, per - 1].astype(np.int64)
    counts = {int(u): int(np.sum(user_col == u)) for u in np.unique(user_col)}
    quotas = split_counts(counts, train_fraction)
    train_mask = np.zeros(header.record_count, dtype=bool)
    for user, quota in quotas.items():
        idx = np.flatnonzero(user_col == user)
        shuffled = rng_stream(header.base_seed, "split", user).permutation(idx)
        train_mask[shuffled[:quota]] = True

    if out_base is None:
        base = _resolve_pair(files)[0][: -len(".header.json")]
    else:
        base = str(out_base)
    outputs = []
    for tag, mask in (("train", train_mask), ("test", ~train_mask)):
        header_path, bin_path = _resolve_pair(f"{base}.{tag}")
        selected = matrix[mask]
        selected.astype("<f4").tofile(bin_path)
        part = DatasetHeader(
            schema_version=SCHEMA_VERSION, m=header.m, s=header.s, q2=header.q2,
            record_count=int(mask.sum()), split_tag=tag,
            base_seed=header.base_seed, config_digest=header.config_digest)
        _write_header(header_path, part)
        outputs.append((header_path, bin_path))
    return outputs[0], outputs[1]


def write_predictions(out_base: str, batch_ids: dict, h_pred: np.ndarray,
                      config_digest: str) -> tuple:
    """Write a prediction file pair in the dataset binary convention.

    batch_ids carries the scenario/block/user id arrays copied from the
    dataset the predictions answer; h_pred is (count, M, S) complex.
    """
    h_pred = np.asarray(h_pred)
    count, m, s = h_pred.shape
    header_path, bin_path = _resolve_pair(out_base)
    with open(bin_path, "wb") as fh:
        for i in range(count):
            row = np.concatenate([
                _interleave(h_pred[i]),
                np.array([batch_ids["scenario_id"][i], batch_ids["block_id"][i],
                          batch_ids["user_id"][i]], dtype="<f4"),
            ])
            row.tofile(fh)
    doc = {"schema_version": PREDICTION_SCHEMA_VERSION, "m": int(m), "s": int(s),
           "record_count": int(count), "config_digest": config_digest}
    with open(header_path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, indent=2)
        fh.write("\n")
    return header_path, bin_path


def load_predictions(files) -> dict:
    """Load a prediction file pair into arrays keyed like the writer input."""
    header_path, bin_path = _resolve_pair(files)
    with open(header_path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("schema_version") != PREDICTION_SCHEMA_VERSION:
        raise DatasetFormatError(
            f"unsupported prediction schema {doc.get('schema_version')!r}")
    m, s, count = doc["m"], doc["s"], doc["record_count"]
    per = 2 * m * s + 3
    flat = np.fromfile(bin_path, dtype="<f4")
    if flat.size != count * per:
        raise DatasetFormatError(
            f"payload holds {flat.size} floats, header implies {count * per}")
    matrix = flat.reshape(count, per)
    return {
        "h_pred": _deinterleave(matrix[:, : 2 * m * s], (count, m, s)),
        "scenario_id": matrix[:, per - 3].astype(np.int64),
        "block_id": matrix[:, per - 2].astype(np.int64),
        "user_id": matrix[:, per - 1].astype(np.int64),
        "config_digest": doc["config_digest"],
    }
