from typing import Iterable, Optional, Tuple, Union

import numpy as np

from .enums import Parity
from .torus import ModeIndex, ModeLike, SpectralField, TorusGeometry, representative_sign, spectral_basis


class FieldBuilder(object):
    """The FieldBuilder assembles a SpectralField coefficient by coefficient.

    Every method returns the builder so calls can be chained; :meth:`finalize`
    produces the immutable field. Coefficients given for the same entry twice
    are added.

    Attributes:
          _geometry: The torus.
          _trunc: Truncation order of the produced field.
          _values: Coefficients accumulated so far, layout ``[a..., b...]``.

    Example:
          >>> FieldBuilder(TorusGeometry(1, 1), 6).cos((2, 1), 1.0).sin((0, 1), -0.5).finalize()
    """

    def __init__(self, geometry: Union[TorusGeometry, Tuple[float, float]], trunc: int):
        self._geometry = TorusGeometry.of(geometry)
        self._trunc = int(trunc)
        self._values = np.zeros(spectral_basis(self._trunc).dim)

    def _add(self, m: ModeLike, parity: Parity, value: float):
        slot, sign = spectral_basis(self._trunc).position(m, parity)
        self._values[slot] += sign * float(value)

    def cos(self, m: ModeLike, value: float = 1.0):
        """Add ``value`` times c_m.

        Args:
              m: Any representative of the mode; c_{-m} = -c_m is accounted for.
              value (float): Coefficient.
        Returns:
              FieldBuilder: This instance
        """
        self._add(m, Parity.COS, value)
        return self

    def sin(self, m: ModeLike, value: float = 1.0):
        """Add ``value`` times s_m.

        Returns:
              FieldBuilder: This instance
        """
        self._add(m, Parity.SIN, value)
        return self

    def mode(self, m: ModeLike, parity: Union[Parity, str], value: float = 1.0):
        """Add ``value`` times c_m or s_m, the parity given as an enum or as 'cos'/'sin'.

        Returns:
              FieldBuilder: This instance
        """
        self._add(m, Parity(parity), value)
        return self

    def modes(self, items: Iterable[dict]):
        """Add the entries of a ``[{m, a, b}]`` list as produced by :meth:`SpectralField.to_dict`.

        Returns:
              FieldBuilder: This instance
        """
        for item in items:
            mode, flipped = ModeIndex.of(item['m']).canonical()
            for parity, key in ((Parity.COS, 'a'), (Parity.SIN, 'b')):
                self._add(mode, parity, representative_sign(parity, flipped) * float(item.get(key, 0.0)))
        return self

    def field(self, other: SpectralField, scale: float = 1.0):
        """Add another field, restricted to this builder's truncation.

        Returns:
              FieldBuilder: This instance
        """
        if other.geometry != self._geometry:
            raise ValueError('Field lives on {}, builder on {}'.format(other.geometry, self._geometry))
        self._values += float(scale) * other.restrict(self._trunc).coeffs
        return self

    def random(self, rng: np.random.Generator, max_order: Optional[int] = None, amplitude: float = 1.0):
        """Add independent uniform draws in [-amplitude, amplitude] on every coefficient with |m| ≤ max_order.

        Args:
              rng (np.random.Generator): Source of randomness, consumed in coefficient order.
              max_order (int): Optional. Highest mode order drawn; the truncation when omitted.
              amplitude (float): Half-width of the uniform law.
        Returns:
              FieldBuilder: This instance
        """
        basis = spectral_basis(self._trunc)
        mask = basis.order_mask(self._trunc if max_order is None else max_order)
        draws = rng.uniform(-amplitude, amplitude, basis.dim)
        self._values += np.where(mask, draws, 0.0)
        return self

    def finalize(self) -> SpectralField:
        """Build the field.

        Returns:
              SpectralField: The accumulated field
        """
        return SpectralField(self._geometry, self._trunc, self._values.copy())
