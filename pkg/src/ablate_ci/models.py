"""Built-in fixture models and the external-model subprocess client.

The built-ins (constant, closed-form ridge/OLS, k-nearest-neighbors) exist
so that the library and its tests run with no ML framework installed.
Anything else plugs in through ``ExecModel``, which speaks a line protocol
over a child process's stdin/stdout:

    engine -> child   HELLO <M>\\n
    child  -> engine  READY\\n
    engine -> child   BATCH <n>\\n  then n lines of M space-separated numbers
    child  -> engine  exactly n prediction lines, then a flush
    child  -> engine  ERR <message>\\n aborts the run at any point

Numbers are shortest round-trip decimals for 64-bit floats with ``.`` as
the decimal separator; every line ends with a single line feed.  The child
is started once, reused across batches, and must exit 0 when the engine
closes its stdin.
"""

from __future__ import annotations

import math
import queue
import shlex
import subprocess
import threading
from dataclasses import dataclass, field

import numpy as np

from .core import (
    Dataset,
    InvalidArgumentError,
    ModelContractError,
    SingularFitError,
)

MODEL_KINDS = ("constant", "ols", "knn", "exec")

DEFAULT_BATCH_TIMEOUT = 60.0


class ConstantModel:
    """Predicts one fixed value for every row."""

    def __init__(self, value: float):
        if not math.isfinite(value):
            raise InvalidArgumentError("constant model value must be finite")
        self.value = float(value)

    def predict_batch(self, rows: np.ndarray) -> np.ndarray:
        rows = np.asarray(rows, dtype=np.float64)
        return np.full(rows.shape[0], self.value, dtype=np.float64)


class LinearModel:
    """w . x + b with fixed coefficients."""

    def __init__(self, weights: np.ndarray, intercept: float):
        self.weights = np.asarray(weights, dtype=np.float64).ravel()
        self.intercept = float(intercept)
        if not np.isfinite(self.weights).all() or not math.isfinite(self.intercept):
            raise InvalidArgumentError("linear model coefficients must be finite")

    def predict_batch(self, rows: np.ndarray) -> np.ndarray:
        rows = np.asarray(rows, dtype=np.float64)
        return rows @ self.weights + self.intercept


class KNNModel:
    """Mean target of the k nearest training rows (Euclidean distance).

    Distance ties break toward the lower training-row index, which keeps
    predictions deterministic.
    """

    def __init__(self, train_features: np.ndarray, train_targets: np.ndarray, k: int):
        self.train_features = np.asarray(train_features, dtype=np.float64)
        self.train_targets = np.asarray(train_targets, dtype=np.float64)
        self.k = int(k)

    def predict_batch(self, rows: np.ndarray) -> np.ndarray:
        rows = np.asarray(rows, dtype=np.float64)
        diff = rows[:, None, :] - self.train_features[None, :, :]
        sq_dist = np.einsum("bnm,bnm->bn", diff, diff)
        # stable sort keeps equal distances in training-row order
        order = np.argsort(sq_dist, axis=1, kind="stable")[:, : self.k]
        return self.train_targets[order].mean(axis=1)


def fit_constant(data: Dataset) -> ConstantModel:
    """Constant model at the target mean (the best constant under squared loss)."""
    return ConstantModel(math.fsum(data.target) / data.n_rows)


def fit_ols(data: Dataset, ridge_lambda: float = 0.0) -> LinearModel:
    """Closed-form least squares with an unpenalized intercept.

    Minimizes ||Xw + b - y||^2 + ridge_lambda * ||w||^2 via least squares
    on the (optionally ridge-augmented) design matrix, which is the stable
    way to solve the normal equations (X'X + lambda I) w = X'y.  A singular
    design with ridge_lambda = 0 raises SingularFitError rather than
    silently picking one of the infinitely many solutions.
    """
    if not (math.isfinite(ridge_lambda) and ridge_lambda >= 0.0):
        raise InvalidArgumentError("ridge_lambda must be finite and >= 0")
    n, m = data.features.shape
    design = np.hstack([data.features, np.ones((n, 1))])
    if ridge_lambda == 0.0:
        if np.linalg.matrix_rank(design) < m + 1:
            raise SingularFitError(
                "normal matrix is singular; fit with ridge_lambda > 0"
            )
        rows, rhs = design, data.target
    else:
        penalty = np.hstack(
            [math.sqrt(ridge_lambda) * np.eye(m), np.zeros((m, 1))]
        )
        rows = np.vstack([design, penalty])
        rhs = np.concatenate([data.target, np.zeros(m)])
    solution, *_ = np.linalg.lstsq(rows, rhs, rcond=None)
    return LinearModel(weights=solution[:m], intercept=solution[m])


def fit_knn(data: Dataset, k: int = 5) -> KNNModel:
    if not 1 <= int(k) <= data.n_rows:
        raise InvalidArgumentError(
            f"knn k must be in [1, {data.n_rows}], got {k}"
        )
    return KNNModel(data.features, data.target, int(k))


def format_number(x: float) -> str:
    """Shortest decimal that round-trips a 64-bit float."""
    return repr(float(x))


class ExecModel:
    """Client side of the external model protocol.

    The child process is launched and handshaken eagerly, reused for every
    batch, and closed (stdin EOF, then wait) by ``close`` or the context
    manager.  Protocol violations, child death, and per-batch timeouts all
    raise ModelContractError carrying the child's captured stderr.
    """

    def __init__(
        self,
        command: list[str],
        n_features: int,
        serial: bool = True,
        batch_timeout: float = DEFAULT_BATCH_TIMEOUT,
    ):
        if not command:
            raise InvalidArgumentError("exec model command must be non-empty")
        if n_features < 1:
            raise InvalidArgumentError("n_features must be >= 1")
        self.command = list(command)
        self.n_features = int(n_features)
        self.serial = bool(serial)
        self.batch_timeout = float(batch_timeout)
        self._stderr_lines: list[str] = []
        self._lines: queue.Queue[str | None] = queue.Queue()
        self._lock = threading.Lock()

        try:
            self._proc = subprocess.Popen(
                self.command,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.PIPE,
                text=True,
                encoding="utf-8",
            )
        except OSError as exc:
            raise ModelContractError(
                f"could not launch model command {self.command}: {exc}"
            ) from exc

        threading.Thread(target=self._pump_stdout, daemon=True).start()
        threading.Thread(target=self._pump_stderr, daemon=True).start()

        self._send(f"HELLO {self.n_features}\n")
        ready = self._next_line("handshake")
        if ready != "READY":
            self._abort(f"expected READY, got {ready!r}")

    # -- plumbing ---------------------------------------------------------

    def _pump_stdout(self) -> None:
        assert self._proc.stdout is not None
        for line in self._proc.stdout:
            self._lines.put(line.rstrip("\n"))
        self._lines.put(None)  # EOF marker

    def _pump_stderr(self) -> None:
        assert self._proc.stderr is not None
        for line in self._proc.stderr:
            self._stderr_lines.append(line.rstrip("\n"))

    def _diagnostics(self) -> str:
        tail = self._stderr_lines[-5:]
        return ("; child stderr: " + " | ".join(tail)) if tail else ""

    def _send(self, text: str) -> None:
        assert self._proc.stdin is not None
        try:
            self._proc.stdin.write(text)
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            self._abort(f"child closed its stdin pipe: {exc}")

    def _next_line(self, phase: str) -> str:
        try:
            line = self._lines.get(timeout=self.batch_timeout)
        except queue.Empty:
            self._abort(f"timeout after {self.batch_timeout}s waiting for {phase}")
        if line is None:
            self._abort(f"child exited during {phase}")
        if line.startswith("ERR "):
            self._abort(f"child reported: {line[4:]}")
        return line

    def _abort(self, message: str) -> None:
        diag = self._diagnostics()
        self._kill()
        raise ModelContractError(f"external model protocol error: {message}{diag}")

    def _kill(self) -> None:
        if self._proc.poll() is None:
            self._proc.kill()
            self._proc.wait()

    # -- public surface ---------------------------------------------------

    def predict_batch(self, rows: np.ndarray) -> np.ndarray:
        rows = np.asarray(rows, dtype=np.float64)
        if rows.ndim != 2 or rows.shape[1] != self.n_features:
            raise InvalidArgumentError(
                f"exec model expects (B, {self.n_features}) rows, got {rows.shape}"
            )
        n = rows.shape[0]
        request = [f"BATCH {n}\n"]
        request.extend(
            " ".join(format_number(v) for v in row) + "\n" for row in rows
        )
        with self._lock:  # one in-flight batch
            if self._proc.poll() is not None and self._lines.empty():
                self._abort("child process is no longer running")
            self._send("".join(request))
            out = np.empty(n, dtype=np.float64)
            for b in range(n):
                line = self._next_line(f"prediction {b + 1}/{n}")
                try:
                    out[b] = float(line)
                except ValueError:
                    self._abort(f"malformed prediction line {line!r}")
        return out

    def close(self) -> None:
        """Signal shutdown (stdin EOF) and reap the child."""
        if self._proc.stdin is not None and not self._proc.stdin.closed:
            try:
                self._proc.stdin.close()
            except OSError:
                pass
        try:
            self._proc.wait(timeout=5.0)
        except subprocess.TimeoutExpired:
            self._kill()

    def __enter__(self) -> "ExecModel":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()

    def __del__(self) -> None:
        try:
            self._kill()
        except Exception:
            pass


def exec_model(
    command: list[str],
    M: int,
    serial: bool = True,
    batch_timeout: float = DEFAULT_BATCH_TIMEOUT,
) -> ExecModel:
    """Attach an external model process speaking the line protocol."""
    return ExecModel(command, n_features=M, serial=serial, batch_timeout=batch_timeout)


@dataclass(frozen=True)
class ModelSpec:
    """Parsed model selection, e.g. from a --model CLI string."""

    kind: str
    value: float | None = None  # constant;  None means fit to target mean
    ridge_lambda: float = 0.0  # ols
    k: int = 5  # knn
    command: tuple[str, ...] = field(default_factory=tuple)  # exec
    serial: bool = True  # exec

    def __post_init__(self) -> None:
        if self.kind not in MODEL_KINDS:
            raise InvalidArgumentError(
                f"unknown model kind {self.kind!r}; expected one of {MODEL_KINDS}"
            )
        if self.kind == "exec" and not self.command:
            raise InvalidArgumentError("exec model needs a non-empty command")


def parse_model_spec(text: str) -> ModelSpec:
    """Parse a model string.

    Accepted forms:
      builtin:constant          builtin:constant:v=<x>
      builtin:ols               builtin:ols:lambda=<x>
      builtin:knn               builtin:knn:k=<n>
      exec:<command line>
    """
    if text.startswith("exec:"):
        command = tuple(shlex.split(text[len("exec:") :]))
        return ModelSpec(kind="exec", command=command)
    if not text.startswith("builtin:"):
        raise InvalidArgumentError(
            f"model must start with 'builtin:' or 'exec:', got {text!r}"
        )
    name, _, params = text[len("builtin:") :].partition(":")
    try:
        if name == "constant":
            if not params:
                return ModelSpec(kind="constant")
            key, _, raw = params.partition("=")
            if key != "v":
                raise InvalidArgumentError(f"constant takes v=<x>, got {params!r}")
            return ModelSpec(kind="constant", value=float(raw))
        if name == "ols":
            if not params:
                return ModelSpec(kind="ols")
            key, _, raw = params.partition("=")
            if key != "lambda":
                raise InvalidArgumentError(f"ols takes lambda=<x>, got {params!r}")
            return ModelSpec(kind="ols", ridge_lambda=float(raw))
        if name == "knn":
            if not params:
                return ModelSpec(kind="knn")
            key, _, raw = params.partition("=")
            if key != "k":
                raise InvalidArgumentError(f"knn takes k=<n>, got {params!r}")
            return ModelSpec(kind="knn", k=int(raw))
    except ValueError as exc:
        raise InvalidArgumentError(f"bad model parameter in {text!r}: {exc}") from exc
    raise InvalidArgumentError(f"unknown builtin model {name!r}")


def build_model(
    spec: ModelSpec,
    data: Dataset,
    batch_timeout: float = DEFAULT_BATCH_TIMEOUT,
):
    """Fit or attach the model a spec describes.

    Exec models hold an OS process; close them (or use run contexts) when
    done.
    """
    if spec.kind == "constant":
        return fit_constant(data) if spec.value is None else ConstantModel(spec.value)
    if spec.kind == "ols":
        return fit_ols(data, ridge_lambda=spec.ridge_lambda)
    if spec.kind == "knn":
        return fit_knn(data, k=spec.k)
    return exec_model(
        list(spec.command),
        M=data.n_features,
        serial=spec.serial,
        batch_timeout=batch_timeout,
    )
