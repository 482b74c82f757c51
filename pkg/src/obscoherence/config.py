"""Central tolerance record.

Every numerical threshold used by validators, solvers and audits lives in
:class:`Tolerances`.  The defaults can be overridden through the
``OBSCOHERENCE_TOL`` environment variable, e.g.::

    OBSCOHERENCE_TOL="tol_gap=1e-9,max_iter=300"

The override is off unless the variable is set.
"""
import dataclasses
import os

ENV_VAR = "OBSCOHERENCE_TOL"


@dataclasses.dataclass(frozen=True)
class Tolerances:
    hermitian: float = 1e-10
    trace: float = 1e-10
    psd: float = 1e-10
    eig_reconstruction: float = 1e-9
    orthonormal: float = 1e-10
    choi_psd: float = 1e-9
    choi_tp: float = 1e-9
    kraus_completeness: float = 1e-10
    mio_audit: float = 1e-6
    zero_entry: float = 1e-12
    nontrivial: float = 1e-12
    # interior point solver
    tol_gap: float = 1e-8
    tol_feas: float = 1e-8
    max_iter: int = 200
    rank: float = 1e-10
    # audits
    hierarchy_slack: float = 1e-6
    tight: float = 1e-5
    monotonicity_slack: float = 1e-6
    min_branch_prob: float = 1e-12

    def replace(self, **kwargs) -> "Tolerances":
        return dataclasses.replace(self, **kwargs)

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


def _parse_override(text: str) -> dict:
    fields = {f.name: f.type for f in dataclasses.fields(Tolerances)}
    out = {}
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        key, sep, value = item.partition("=")
        key = key.strip()
        if not sep or key not in fields:
            raise ValueError(f"bad {ENV_VAR} entry {item!r}; known keys: {sorted(fields)}")
        out[key] = int(value) if key == "max_iter" else float(value)
    return out


def get_tolerances() -> Tolerances:
    """Defaults, with the environment override applied when present."""
    text = os.environ.get(ENV_VAR)
    if not text:
        return Tolerances()
    return Tolerances(**_parse_override(text))


DEFAULT = Tolerances()
