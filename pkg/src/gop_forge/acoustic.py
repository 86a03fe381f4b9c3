"""Acoustic front-end and monophone GMM-HMM model.

Features are 13 MFCCs with deltas and double-deltas (39 dims) followed by
per-utterance cepstral mean/variance normalization.  The acoustic model is
a left-to-right monophone HMM with a diagonal-covariance GMM per state;
"senones" here are simply the HMM states, numbered phone-major.
"""

import math
import struct
import wave
from dataclasses import dataclass, field

import numpy as np
from scipy.fft import dct

from .errors import (
    DimensionMismatch,
    InsufficientData,
    TooShort,
    UnknownSenone,
    UnsupportedFormat,
)

LOG_FLOOR = 1e-10
CROSS_PHONE_FLOOR = math.log(1e-10)


@dataclass
class FeatureConfig:
    frame_length: float = 0.025
    frame_shift: float = 0.010
    preemphasis: float = 0.97
    num_mel_filters: int = 23
    num_ceps: int = 13
    low_freq: float = 20.0
    high_freq: float = 0.0  # 0 means Nyquist
    delta_window: int = 2
    cmvn: bool = True


@dataclass(frozen=True)
class FeatureMatrix:
    frames: np.ndarray  # T x D
    frame_shift: float
    frame_length: float

    def __post_init__(self):
        if self.frames.ndim != 2 or self.frames.shape[0] < 1:
            raise TooShort("feature matrix needs at least one frame")
        if not np.all(np.isfinite(self.frames)):
            raise ValueError("non-finite feature values")

    @property
    def num_frames(self):
        return self.frames.shape[0]

    @property
    def dim(self):
        return self.frames.shape[1]


def read_wav(path):
    """Read a RIFF PCM-16 mono WAV file; returns (float array in [-1,1], rate)."""
    try:
        with wave.open(str(path), "rb") as w:
            if w.getcomptype() != "NONE":
                raise UnsupportedFormat(f"{path}: compressed WAV not supported")
            if w.getsampwidth() != 2:
                raise UnsupportedFormat(f"{path}: only PCM-16 supported")
            if w.getnchannels() != 1:
                raise UnsupportedFormat(f"{path}: only mono supported")
            rate = w.getframerate()
            data = w.readframes(w.getnframes())
    except wave.Error as e:
        raise UnsupportedFormat(f"{path}: {e}") from e
    samples = np.frombuffer(data, dtype="<i2").astype(np.float64) / 32768.0
    return samples, rate


def write_wav(path, samples, rate):
    pcm = np.clip(np.round(np.asarray(samples) * 32768.0), -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as w:
        w.setnchannels(1)
        w.setsampwidth(2)
        w.setframerate(rate)
        w.writeframes(pcm.tobytes())


def _mel(hz):
    return 2595.0 * np.log10(1.0 + hz / 700.0)


def _mel_inv(mel):
    return 700.0 * (10.0 ** (mel / 2595.0) - 1.0)


def _mel_filterbank(num_filters, nfft, rate, low_freq, high_freq):
    high = high_freq if high_freq > 0 else rate / 2.0
    points = _mel_inv(np.linspace(_mel(low_freq), _mel(high), num_filters + 2))
    bins = np.floor((nfft + 1) * points / rate).astype(int)
    fbank = np.zeros((num_filters, nfft // 2 + 1))
    for m in range(1, num_filters + 1):
        lo, mid, hi = bins[m - 1], bins[m], bins[m + 1]
        for k in range(lo, mid):
            if mid > lo:
                fbank[m - 1, k] = (k - lo) / (mid - lo)
        for k in range(mid, hi):
            if hi > mid:
                fbank[m - 1, k] = (hi - k) / (hi - mid)
    return fbank


def _deltas(x, window):
    """Standard regression deltas with edge padding."""
    T = x.shape[0]
    denom = 2.0 * sum(n * n for n in range(1, window + 1))
    padded = np.concatenate([np.repeat(x[:1], window, axis=0), x,
                             np.repeat(x[-1:], window, axis=0)])
    out = np.zeros_like(x)
    for n in range(1, window + 1):
        out += n * (padded[window + n:window + n + T] - padded[window - n:window - n + T])
    return out / denom


def extract_features(samples, rate, config=None):
    """MFCC + delta + double-delta features with per-utterance CMVN."""
    config = config or FeatureConfig()
    if rate < 8000:
        raise UnsupportedFormat(f"sample rate {rate} below 8 kHz")
    samples = np.asarray(samples, dtype=np.float64)
    frame_len = int(round(config.frame_length * rate))
    shift = int(round(config.frame_shift * rate))
    if len(samples) < frame_len:
        raise TooShort(
            f"{len(samples)} samples is shorter than one {frame_len}-sample frame"
        )
    emphasized = np.append(samples[0], samples[1:] - config.preemphasis * samples[:-1])
    num_frames = 1 + (len(emphasized) - frame_len) // shift
    idx = np.arange(frame_len)[None, :] + shift * np.arange(num_frames)[:, None]
    frames = emphasized[idx] * np.hamming(frame_len)

    nfft = 1
    while nfft < frame_len:
        nfft *= 2
    power = np.abs(np.fft.rfft(frames, nfft)) ** 2 / nfft
    fbank = _mel_filterbank(config.num_mel_filters, nfft, rate,
                            config.low_freq, config.high_freq)
    logmel = np.log(np.maximum(power @ fbank.T, LOG_FLOOR))
    ceps = dct(logmel, type=2, axis=1, norm="ortho")[:, :config.num_ceps]

    d1 = _deltas(ceps, config.delta_window)
    d2 = _deltas(d1, config.delta_window)
    feats = np.hstack([ceps, d1, d2])
    if config.cmvn:
        mean = feats.mean(axis=0)
        std = feats.std(axis=0)
        std[std < 1e-10] = 1.0
        feats = (feats - mean) / std
    return FeatureMatrix(feats, config.frame_shift, config.frame_length)


# ---------------------------------------------------------------------------
# GMM-HMM


@dataclass
class Gmm:
    weights: np.ndarray  # K
    means: np.ndarray    # K x D
    variances: np.ndarray  # K x D

    def log_density(self, x):
        """log sum_k w_k N(x; mu_k, diag sigma_k)."""
        diff = x[None, :] - self.means
        comp = (
            -0.5 * np.sum(np.log(2.0 * np.pi * self.variances), axis=1)
            - 0.5 * np.sum(diff * diff / self.variances, axis=1)
            + np.log(self.weights)
        )
        m = comp.max()
        return m + np.log(np.sum(np.exp(comp - m)))

    def log_density_many(self, X):
        X = np.asarray(X)
        lp = np.empty((X.shape[0], len(self.weights)))
        for k in range(len(self.weights)):
            diff = X - self.means[k]
            lp[:, k] = (
                -0.5 * np.sum(np.log(2.0 * np.pi * self.variances[k]))
                - 0.5 * np.sum(diff * diff / self.variances[k], axis=1)
                + np.log(self.weights[k])
            )
        m = lp.max(axis=1, keepdims=True)
        return (m + np.log(np.sum(np.exp(lp - m), axis=1, keepdims=True))).ravel()


@dataclass
class AcousticModel:
    phones: tuple
    gmms: list  # one Gmm per senone, phone-major
    self_loops: np.ndarray  # per-senone self-loop probability
    states_per_phone: int = 3
    dim: int = 39

    @property
    def senone_count(self):
        return len(self.phones) * self.states_per_phone

    def senone_index(self, phone_index, state):
        return phone_index * self.states_per_phone + state

    def phone_of_senone(self, senone):
        self._check(senone)
        return senone // self.states_per_phone

    def state_of_senone(self, senone):
        return senone % self.states_per_phone

    def _check(self, senone):
        if not 0 <= senone < self.senone_count:
            raise UnknownSenone(f"senone {senone} out of range")

    def forward_prob(self, senone):
        self._check(senone)
        return 1.0 - self.self_loops[senone]

    def exit_logprob(self, senone):
        """Log prob of leaving the phone from its last state."""
        return math.log(max(self.forward_prob(senone), LOG_FLOOR))

    def entry_logprob(self):
        """Uniform cross-phone entry probability."""
        return -math.log(len(self.phones))

    def transition_logprob_raw(self, from_senone, to_senone):
        """Within-phone transition log prob; floor for non-topology pairs."""
        self._check(to_senone)
        if from_senone == to_senone:
            return math.log(max(self.self_loops[from_senone], LOG_FLOOR))
        same_phone = (from_senone // self.states_per_phone
                      == to_senone // self.states_per_phone)
        if same_phone and to_senone == from_senone + 1:
            return math.log(max(self.forward_prob(from_senone), LOG_FLOOR))
        return CROSS_PHONE_FLOOR

    def transition_logprob(self, from_senone, to_senone):
        """As transition_logprob_raw, plus uniform cross-phone entries."""
        self._check(from_senone)
        self._check(to_senone)
        from_last = self.state_of_senone(from_senone) == self.states_per_phone - 1
        to_entry = self.state_of_senone(to_senone) == 0
        diff_phone = (from_senone // self.states_per_phone
                      != to_senone // self.states_per_phone)
        if from_last and to_entry and (diff_phone or to_senone != from_senone):
            return self.exit_logprob(from_senone) + self.entry_logprob()
        return self.transition_logprob_raw(from_senone, to_senone)

    def frame_loglikes(self, features):
        """T x N matrix of per-senone log densities."""
        if features.dim != self.dim:
            raise DimensionMismatch(
                f"feature dim {features.dim} != model dim {self.dim}"
            )
        T = features.num_frames
        out = np.empty((T, self.senone_count))
        for s, gmm in enumerate(self.gmms):
            out[:, s] = gmm.log_density_many(features.frames)
        return out


def posteriors(model, features):
    """Per-frame senone posteriors under a uniform state prior."""
    loglikes = model.frame_loglikes(features)
    m = loglikes.max(axis=1, keepdims=True)
    p = np.exp(loglikes - m)
    p /= p.sum(axis=1, keepdims=True)
    return p


@dataclass
class TrainConfig:
    max_iterations: int = 10
    tolerance: float = 1e-6
    num_components: int = 1
    variance_floor_fraction: float = 1e-3
    self_loop_init: float = 0.6
    seed: int = 0


def _uniform_segmentation(T, num_states):
    """Assign T frames to num_states states as evenly as possible, in order."""
    bounds = np.linspace(0, T, num_states + 1).round().astype(int)
    labels = np.empty(T, dtype=int)
    for s in range(num_states):
        labels[bounds[s]:bounds[s + 1]] = s
    return labels


def _viterbi_states(loglikes, state_seq, log_self, log_fwd):
    """Best monotone path through state_seq (indices into loglikes columns)."""
    T = loglikes.shape[0]
    S = len(state_seq)
    NEG = -1e30
    score = np.full((T, S), NEG)
    back = np.zeros((T, S), dtype=int)
    score[0, 0] = loglikes[0, state_seq[0]]
    for t in range(1, T):
        for s in range(S):
            stay = score[t - 1, s] + log_self[state_seq[s]]
            best, arg = stay, s
            if s > 0:
                move = score[t - 1, s - 1] + log_fwd[state_seq[s - 1]]
                if move > best:
                    best, arg = move, s - 1
            if best > NEG / 2:
                score[t, s] = best + loglikes[t, state_seq[s]]
                back[t, s] = arg
    final = score[T - 1, S - 1] + log_fwd[state_seq[S - 1]]
    if final < NEG / 2:
        raise InsufficientData("utterance too short for its transcript")
    path = np.empty(T, dtype=int)
    s = S - 1
    for t in range(T - 1, -1, -1):
        path[t] = state_seq[s]
        s = back[t, s] if t > 0 else s
    return path, final


def train_am(features_list, transcripts, inventory, config=None):
    """Viterbi-EM training of a monophone GMM-HMM.

    `transcripts` are phone sequences (one per utterance).  Starts from a
    uniform segmentation, then alternates Viterbi alignment with parameter
    re-estimation; the aligned log-likelihood is non-decreasing.  Returns
    (model, per-iteration log-likelihoods).
    """
    config = config or TrainConfig()
    if not features_list:
        raise InsufficientData("no training utterances")
    phones = tuple(inventory.ordered())
    phone_index = {p: i for i, p in enumerate(phones)}
    spp = 3
    N = len(phones) * spp
    dim = features_list[0].dim
    for feats, trans in zip(features_list, transcripts):
        for p in trans:
            if p not in phone_index:
                raise InsufficientData(f"transcript phone {p!r} not in inventory")
        if feats.num_frames < spp * len(trans):
            raise InsufficientData("fewer frames than transcript states")

    all_frames = np.vstack([f.frames for f in features_list])
    global_mean = all_frames.mean(axis=0)
    global_var = all_frames.var(axis=0) + 1e-6
    var_floor = config.variance_floor_fraction * global_var

    state_seqs = []
    for trans in transcripts:
        seq = []
        for p in trans:
            base = phone_index[p] * spp
            seq.extend(range(base, base + spp))
        state_seqs.append(np.array(seq, dtype=int))

    # flat start from the uniform segmentation
    assign = [
        np.array([seq[j] for j in _uniform_segmentation(f.num_frames, len(seq))])
        for f, seq in zip(features_list, state_seqs)
    ]

    def estimate(assignments):
        gmms = []
        self_loops = np.full(N, config.self_loop_init)
        occ = np.zeros(N)
        stay = np.zeros(N)
        leave = np.zeros(N)
        sums = np.zeros((N, dim))
        sqsums = np.zeros((N, dim))
        for f, labels in zip(features_list, assignments):
            X = f.frames
            for s in range(N):
                mask = labels == s
                occ[s] += mask.sum()
                sums[s] += X[mask].sum(axis=0)
                sqsums[s] += (X[mask] ** 2).sum(axis=0)
            same = labels[1:] == labels[:-1]
            for s in range(N):
                mask = labels[:-1] == s
                stay[s] += (mask & same).sum()
                leave[s] += (mask & ~same).sum()
            leave[labels[-1]] += 1  # exit at utterance end
        for s in range(N):
            if occ[s] >= 2:
                mean = sums[s] / occ[s]
                var = np.maximum(sqsums[s] / occ[s] - mean ** 2, var_floor)
            else:
                mean = global_mean.copy()
                var = global_var.copy()
            gmms.append(Gmm(np.array([1.0]), mean[None, :], var[None, :]))
            total = stay[s] + leave[s]
            if total > 0:
                self_loops[s] = min(max(stay[s] / total, 0.05), 0.95)
        return gmms, self_loops

    gmms, self_loops = estimate(assign)
    model = AcousticModel(phones, gmms, self_loops, spp, dim)
    likelihoods = []
    prev_ll = -np.inf
    for _ in range(config.max_iterations):
        log_self = np.log(model.self_loops)
        log_fwd = np.log(1.0 - model.self_loops)
        total_ll = 0.0
        assign = []
        for f, seq in zip(features_list, state_seqs):
            loglikes = model.frame_loglikes(f)
            path, ll = _viterbi_states(loglikes, seq, log_self, log_fwd)
            assign.append(path)
            total_ll += ll
        likelihoods.append(total_ll)
        if total_ll - prev_ll < config.tolerance and likelihoods[:-1]:
            break
        prev_ll = total_ll
        gmms, self_loops = estimate(assign)
        model = AcousticModel(phones, gmms, self_loops, spp, dim)
    if config.num_components > 1:
        model = _split_and_refine(model, features_list, state_seqs, config, var_floor)
    return model, likelihoods


def _split_and_refine(model, features_list, state_seqs, config, var_floor):
    """Binary mixture splitting followed by a few EM passes per senone."""
    rng = np.random.default_rng(config.seed)
    while len(model.gmms[0].weights) < config.num_components:
        new_gmms = []
        for gmm in model.gmms:
            k = int(np.argmax(gmm.weights))
            offset = 0.2 * np.sqrt(gmm.variances[k])
            weights = np.append(gmm.weights, gmm.weights[k] / 2.0)
            weights[k] /= 2.0
            means = np.vstack([gmm.means, gmm.means[k] + offset])
            means[k] -= offset
            variances = np.vstack([gmm.variances, gmm.variances[k]])
            new_gmms.append(Gmm(weights, means, variances))
        model = AcousticModel(model.phones, new_gmms, model.self_loops,
                              model.states_per_phone, model.dim)
        # one Viterbi pass + per-senone GMM EM
        log_self = np.log(model.self_loops)
        log_fwd = np.log(1.0 - model.self_loops)
        frames_per_senone = {s: [] for s in range(model.senone_count)}
        for f, seq in zip(features_list, state_seqs):
            loglikes = model.frame_loglikes(f)
            path, _ = _viterbi_states(loglikes, seq, log_self, log_fwd)
            for t, s in enumerate(path):
                frames_per_senone[s].append(f.frames[t])
        for s, gmm in enumerate(model.gmms):
            X = np.array(frames_per_senone[s])
            if len(X) < 2 * len(gmm.weights):
                continue
            for _ in range(5):
                resp = np.zeros((len(X), len(gmm.weights)))
                for k in range(len(gmm.weights)):
                    diff = X - gmm.means[k]
                    resp[:, k] = (
                        np.log(gmm.weights[k])
                        - 0.5 * np.sum(np.log(2 * np.pi * gmm.variances[k]))
                        - 0.5 * np.sum(diff * diff / gmm.variances[k], axis=1)
                    )
                resp = np.exp(resp - resp.max(axis=1, keepdims=True))
                resp /= resp.sum(axis=1, keepdims=True)
                nk = resp.sum(axis=0) + 1e-10
                gmm.weights = nk / nk.sum()
                gmm.means = (resp.T @ X) / nk[:, None]
                for k in range(len(gmm.weights)):
                    diff = X - gmm.means[k]
                    gmm.variances[k] = np.maximum(
                        (resp[:, k][:, None] * diff * diff).sum(axis=0) / nk[k],
                        var_floor,
                    )
        _ = rng  # splitting is deterministic; rng reserved for perturbation variants
    return model


# ---------------------------------------------------------------------------
# persistence

MODEL_MAGIC = "gop-forge-am v1"


def save_model(model, path):
    with open(path, "w", newline="\n") as f:
        f.write(MODEL_MAGIC + "\n")
        f.write(f"phones {' '.join(model.phones)}\n")
        f.write(f"states_per_phone {model.states_per_phone}\n")
        f.write(f"dim {model.dim}\n")
        for s in range(model.senone_count):
            gmm = model.gmms[s]
            f.write(f"senone {s} {len(gmm.weights)} {float(model.self_loops[s])!r}\n")
            for k in range(len(gmm.weights)):
                f.write(f"w {float(gmm.weights[k])!r}\n")
                f.write("m " + " ".join(repr(float(v)) for v in gmm.means[k]) + "\n")
                f.write("v " + " ".join(repr(float(v)) for v in gmm.variances[k]) + "\n")


def load_model(path):
    with open(path) as f:
        lines = [ln.rstrip("\n") for ln in f]
    if not lines or lines[0] != MODEL_MAGIC:
        raise UnsupportedFormat(f"{path}: not a {MODEL_MAGIC!r} file")
    phones = tuple(lines[1].split()[1:])
    spp = int(lines[2].split()[1])
    dim = int(lines[3].split()[1])
    gmms = []
    self_loops = []
    i = 4
    while i < len(lines):
        _, _, ncomp, loop = lines[i].split()
        ncomp = int(ncomp)
        self_loops.append(float(loop))
        weights, means, variances = [], [], []
        i += 1
        for _ in range(ncomp):
            weights.append(float(lines[i].split()[1]))
            means.append([float(v) for v in lines[i + 1].split()[1:]])
            variances.append([float(v) for v in lines[i + 2].split()[1:]])
            i += 3
        gmms.append(Gmm(np.array(weights), np.array(means), np.array(variances)))
    return AcousticModel(phones, gmms, np.array(self_loops), spp, dim)


def save_features(archive, path):
    """Text feature archive: `utt-id [ row ; row ; ... ]` per utterance."""
    with open(path, "w", newline="\n") as f:
        for utt_id, feats in archive:
            rows = " ; ".join(
                " ".join(repr(float(v)) for v in row) for row in feats.frames
            )
            f.write(f"{utt_id} [ {rows} ]\n")


def load_features(path, frame_shift=0.010, frame_length=0.025):
    archive = []
    with open(path) as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            utt_id, rest = line.split(" [ ", 1)
            rows = rest.rstrip(" ]").split(" ; ")
            mat = np.array([[float(v) for v in r.split()] for r in rows])
            archive.append((utt_id, FeatureMatrix(mat, frame_shift, frame_length)))
    return archive


FEATURE_MAGIC = b"GFFA\x00\x01"


def save_features_binary(archive, path):
    """Binary feature archive: magic header, then per-utterance records.

    Each record is the utf-8 utterance id (uint16 length prefix), uint32
    frame count, uint32 dimension, then row-major little-endian float32s.
    """
    with open(path, "wb") as f:
        f.write(FEATURE_MAGIC)
        for utt_id, feats in archive:
            name = utt_id.encode("utf-8")
            f.write(struct.pack("<H", len(name)))
            f.write(name)
            f.write(struct.pack("<II", feats.num_frames, feats.frames.shape[1]))
            f.write(np.asarray(feats.frames, dtype="<f4").tobytes())


def load_features_binary(path, frame_shift=0.010, frame_length=0.025):
    with open(path, "rb") as f:
        if f.read(len(FEATURE_MAGIC)) != FEATURE_MAGIC:
            raise UnsupportedFormat(f"{path}: not a feature archive")
        archive = []
        while True:
            head = f.read(2)
            if not head:
                return archive
            (nlen,) = struct.unpack("<H", head)
            utt_id = f.read(nlen).decode("utf-8")
            rows, dim = struct.unpack("<II", f.read(8))
            mat = np.frombuffer(f.read(rows * dim * 4), dtype="<f4")
            mat = mat.reshape(rows, dim).astype(np.float64)
            archive.append((utt_id, FeatureMatrix(mat, frame_shift, frame_length)))
