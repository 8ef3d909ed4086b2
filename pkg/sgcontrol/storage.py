import csv
import json
import os
from typing import Iterable, List, Optional, Sequence

import numpy as np

from .abcs import ResultStorage
from .convexify import ConvexDecomposition, RelaxationTable
from .dynamics import Trajectory
from .saturation import LadderStep
from .signals import ControlSignal
from .torus import ModeSubspace, SpectralField, spectral_basis

FLOAT_FORMAT = '%.17g'


def format_float(value: float) -> str:
    """17 significant digits, enough to read every double back exactly."""
    return FLOAT_FORMAT % float(value)


def _write_csv(path: str, header: Sequence[str], rows: Iterable[Sequence]):
    with open(path, 'w', newline='') as fd:
        writer = csv.writer(fd, lineterminator='\n')
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_float(v) if isinstance(v, (float, np.floating)) else v for v in row])


def _write_json(path: str, data):
    with open(path, 'w') as fd:
        json.dump(data, fd, indent=2, sort_keys=True)
        fd.write('\n')


def _read_json(path: str):
    with open(path, 'r') as fd:
        return json.load(fd)


class FileStorage(ResultStorage):
    """FileStorage writes the results of a run into one directory.

    Layout::

        trajectory.csv          t, v0, v1, v3, spillover
        snapshots/state_XXXXXX.json
        relaxation.csv          k, supF, supKf
        decomposition.json
        ladder.json
        control.csv             t, mode, parity, value
        manifest.json

    Args:
          base_path (str): The output directory, created if missing.
    """

    def __init__(self, base_path: str):
        if not os.path.exists(base_path):
            os.makedirs(base_path)

        self._base_path = base_path

        for p in ['snapshots']:
            if not os.path.exists(os.path.join(base_path, p)):
                os.mkdir(os.path.join(base_path, p))

        self._trajectory_path = os.path.join(base_path, 'trajectory.csv')
        self._snapshot_path = os.path.join(base_path, 'snapshots')
        self._relaxation_path = os.path.join(base_path, 'relaxation.csv')
        self._decomposition_path = os.path.join(base_path, 'decomposition.json')
        self._ladder_path = os.path.join(base_path, 'ladder.json')
        self._control_path = os.path.join(base_path, 'control.csv')
        self._manifest_path = os.path.join(base_path, 'manifest.json')

    @property
    def base_path(self) -> str:
        return self._base_path

    def exists(self) -> bool:
        return os.path.exists(self._manifest_path)

    def save_trajectory(self, trajectory: Trajectory):
        columns = trajectory.diagnostics()
        header = ['t', 'v0', 'v1', 'v3', 'spillover']
        _write_csv(self._trajectory_path, header, zip(*(columns[h] for h in header)))

    def snapshot_path(self, index: int) -> str:
        return os.path.join(self._snapshot_path, 'state_{:06d}.json'.format(index))

    def save_snapshot(self, index: int, state: SpectralField):
        _write_json(self.snapshot_path(index), state.to_dict())

    def fetch_snapshot(self, index: int) -> SpectralField:
        return SpectralField.from_dict(_read_json(self.snapshot_path(index)))

    def snapshots(self) -> List[int]:
        """Indices of the saved snapshots, ascending."""
        names = sorted(n for n in os.listdir(self._snapshot_path) if n.startswith('state_'))
        return [int(n[len('state_'):-len('.json')]) for n in names]

    def save_relaxation(self, table: RelaxationTable):
        _write_csv(self._relaxation_path, ['k', 'supF', 'supKf'],
                   ((int(k), float(F), float(Kf)) for k, F, Kf in table.rows()))

    def save_decomposition(self, decomposition: ConvexDecomposition):
        _write_json(self._decomposition_path, decomposition.to_dict())

    def save_ladder(self, ladder: Sequence[LadderStep], meta: Optional[dict] = None):
        data = dict(meta or {})
        data['steps'] = [step.to_dict() for step in ladder]
        _write_json(self._ladder_path, data)

    def fetch_ladder(self) -> dict:
        return _read_json(self._ladder_path)

    def save_control(self, signal: ControlSignal, times: Optional[np.ndarray] = None,
                     support: Optional[ModeSubspace] = None):
        """One row per sample time and entry of ``support`` (the declared support of the signal by default)."""
        if times is None:
            times = signal.sample_times()
        basis = spectral_basis(signal.trunc)
        entries = list(signal.support if support is None else support)
        slots = [basis.position(m, parity) for m, parity in entries]

        def rows():
            for t in times:
                value = signal.value(t)
                for (m, parity), (slot, sign) in zip(entries, slots):
                    yield float(t), str(m), parity.value, float(sign * value[slot])

        _write_csv(self._control_path, ['t', 'mode', 'parity', 'value'], rows())

    def save_manifest(self, manifest: dict):
        _write_json(self._manifest_path, manifest)

    def fetch_manifest(self) -> dict:
        return _read_json(self._manifest_path)
