from src.errors import GeometryError, EmptyGrid, MaskLengthMismatch, NonPositiveDistance

import numpy as np

from dataclasses import dataclass, field, fields, replace
from enum import Enum
from typing import Iterable, List, Tuple


# Default interpupillary distance (m)
DEFAULT_IPD = 0.063

# |1/g + 1/D - 1/f| tolerance of a design-matched stack (1/m)
DESIGN_MATCH_TOLERANCE = 1e-9


@dataclass(frozen=True)
class DisplayGeometry:
    '''
    The physical stack of the display: LED columns, diffuser, linear lens array and LCD panel.

    The lateral axis x has its origin at the screen center; the lens array lies in the plane z = 0, the
    LED plane at z = -led_lens_gap and the viewers at z > 0. The panel is taken to be coincident with the
    lens plane.

    Attributes:
        screen_width (float): Lateral extent of panel and backlight (m).
        screen_height (float): Vertical extent of the panel (m).
        panel_cols (int): Horizontal pixel count of the LCD.
        panel_rows (int): Vertical pixel count of the LCD.
        subpixels_per_pixel (int): Sub-pixel columns per pixel. Default is 3.
        led_column_count (int): Number of addressable LED columns.
        led_pitch (float): Center-to-center distance of the LED columns (m).
        led_strip_width (float): Emissive width of one LED column (m).
        lens_pitch (float): Center-to-center distance of the linear lenses (m).
        lens_count (int): Number of lenses in the array.
        lens_aperture (float): Clear aperture of one lens, at most lens_pitch (m).
        focal_length (float): Focal length f of every lens (m).
        led_lens_gap (float): Object distance g between LED plane and lens plane (m).
        diffuser_sigma (float): Standard deviation of the Gaussian diffuser blur at the LED plane (m).
        design_distance (float): Nominal viewing distance D (m).
        panel_field_rate (float): Effective LCD field rate (Hz).
        max_neighbors (int): How many lenses on each side of a source's nearest lens can carry its light.
    '''
    screen_width: float
    screen_height: float
    panel_cols: int
    panel_rows: int
    led_column_count: int
    led_pitch: float
    led_strip_width: float
    lens_pitch: float
    lens_count: int
    lens_aperture: float
    focal_length: float
    led_lens_gap: float
    diffuser_sigma: float
    design_distance: float
    panel_field_rate: float
    subpixels_per_pixel: int = 3
    max_neighbors: int = 4

    def __post_init__(self):
        '''
        Checks the geometry invariants.

        Raises:
            GeometryError: If a length is not positive, a count is too small or the columns overflow the panel.
        '''
        for name in ('screen_width', 'screen_height', 'led_pitch', 'led_strip_width', 'lens_pitch',
                     'lens_aperture', 'focal_length', 'led_lens_gap', 'design_distance', 'panel_field_rate'):
            if not getattr(self, name) > 0:
                raise GeometryError(f'{name} must be > 0, got {getattr(self, name)}')

        if self.diffuser_sigma < 0:
            raise GeometryError(f'diffuser_sigma must be >= 0, got {self.diffuser_sigma}')
        if self.led_column_count < 2:
            raise GeometryError(f'led_column_count must be >= 2, got {self.led_column_count}')
        if self.lens_count < 1:
            raise GeometryError(f'lens_count must be >= 1, got {self.lens_count}')
        if min(self.panel_cols, self.panel_rows, self.subpixels_per_pixel) < 1:
            raise GeometryError('panel dimensions must be >= 1')
        if self.max_neighbors < 0:
            raise GeometryError(f'max_neighbors must be >= 0, got {self.max_neighbors}')
        if self.lens_aperture > self.lens_pitch * (1 + 1e-12):
            raise GeometryError('lens_aperture must not exceed lens_pitch')
        if self.led_pitch * self.led_column_count > self.screen_width * 1.01:
            raise GeometryError('LED columns do not fit the panel width')

    @classmethod
    def design_matched(cls, led_lens_gap: float, design_distance: float, **kwargs) -> 'DisplayGeometry':
        '''
        Builds a geometry whose lenses image the LED plane sharply onto the design distance.

        The focal length is derived from the thin-lens equation 1/f = 1/g + 1/D.

        Args:
            led_lens_gap (float): The object distance g (m).
            design_distance (float): The nominal viewing distance D (m).
            **kwargs: Every other DisplayGeometry field.

        Returns:
            DisplayGeometry: The design-matched geometry.
        '''
        if led_lens_gap <= 0 or design_distance <= 0:
            raise NonPositiveDistance('led_lens_gap and design_distance must be > 0')

        focal_length = led_lens_gap * design_distance / (led_lens_gap + design_distance)
        geometry = cls(
            led_lens_gap=led_lens_gap,
            design_distance=design_distance,
            focal_length=focal_length,
            **kwargs
        )

        if abs(geometry.focus_error()) >= DESIGN_MATCH_TOLERANCE:
            raise GeometryError(f'stack is not design-matched (residual {geometry.focus_error():.3e} 1/m)')
        return geometry

    @classmethod
    def prototype(cls) -> 'DisplayGeometry':
        '''
        The 27-inch, 2560x1440, 96-column, 240 Hz prototype viewed at 1 m.

        Six lenses, each spanning 24 LED columns, make the pupils converge at the design distance. The gap is
        chosen so that moving the lit column by one step moves the pupil by a third of the default IPD, and
        the zones repeat every 24 steps (about 0.5 m) across the viewing plane.

        Returns:
            DisplayGeometry: The prototype geometry.
        '''
        screen_width = 0.5977
        led_pitch = screen_width / 96
        gap = 0.2965
        distance = 1.0
        lens_pitch = 24 * led_pitch * distance / (distance + gap)

        return cls.design_matched(
            led_lens_gap=gap,
            design_distance=distance,
            screen_width=screen_width,
            screen_height=0.3362,
            panel_cols=2560,
            panel_rows=1440,
            led_column_count=96,
            led_pitch=led_pitch,
            led_strip_width=0.7 * led_pitch,
            lens_pitch=lens_pitch,
            lens_count=6,
            lens_aperture=lens_pitch,
            diffuser_sigma=0.3 * led_pitch,
            panel_field_rate=240.0,
        )

    @classmethod
    def bench(cls) -> 'DisplayGeometry':
        '''
        Equal-pitch bench stack: one lens per LED column, g = 0.05 m, sharp pupils at 1 m.
        '''
        screen_width = 0.5977
        led_pitch = screen_width / 96

        return cls.design_matched(
            led_lens_gap=0.05,
            design_distance=1.0,
            screen_width=screen_width,
            screen_height=0.3362,
            panel_cols=2560,
            panel_rows=1440,
            led_column_count=96,
            led_pitch=led_pitch,
            led_strip_width=0.4 * led_pitch,
            lens_pitch=led_pitch,
            lens_count=96,
            lens_aperture=led_pitch,
            diffuser_sigma=0.15 * led_pitch,
            panel_field_rate=240.0,
        )

    def with_changes(self, **changes) -> 'DisplayGeometry':
        '''
        Copy of the geometry with some fields replaced (invariants are checked again).
        '''
        return replace(self, **changes)

    def focus_error(self) -> float:
        '''
        Residual of the thin-lens equation at the design distance, 1/g + 1/D - 1/f (1/m).
        '''
        return 1 / self.led_lens_gap + 1 / self.design_distance - 1 / self.focal_length

    def is_design_matched(self) -> bool:
        return abs(self.focus_error()) < DESIGN_MATCH_TOLERANCE

    @property
    def subpixel_columns(self) -> int:
        return self.panel_cols * self.subpixels_per_pixel

    def column_centers(self) -> np.ndarray:
        '''
        Lateral centers of the LED columns, symmetric about x = 0.

        Returns:
            np.ndarray: led_column_count positions (m).
        '''
        index = np.arange(self.led_column_count, dtype=float)
        return (index - (self.led_column_count - 1) / 2) * self.led_pitch

    def subpixel_centers(self) -> np.ndarray:
        '''
        Lateral centers of the LCD sub-pixel columns across the screen width.

        Returns:
            np.ndarray: subpixel_columns positions (m).
        '''
        index = np.arange(self.subpixel_columns, dtype=float)
        return (index + 0.5) / self.subpixel_columns * self.screen_width - self.screen_width / 2

    @classmethod
    def field_names(cls) -> List[str]:
        return [f.name for f in fields(cls)]


class EyeSide(Enum):
    LEFT = 'left'
    RIGHT = 'right'


@dataclass(frozen=True)
class Eye:
    '''
    A tracked eye position.

    Attributes:
        x (float): Lateral position, screen-center origin (m).
        z (float): Distance from the lens plane (m), must be > 0.
        side (EyeSide): Which eye of the viewer this is.
        viewer_id (int): The viewer the eye belongs to.
    '''
    x: float
    z: float
    side: EyeSide = EyeSide.LEFT
    viewer_id: int = 0

    def __post_init__(self):
        if not self.z > 0:
            raise NonPositiveDistance(f'eye distance must be > 0, got {self.z}')

    def mirrored(self) -> 'Eye':
        '''
        The eye reflected about x = 0 (the side swaps with it).
        '''
        side = EyeSide.RIGHT if self.side is EyeSide.LEFT else EyeSide.LEFT
        return Eye(x=-self.x, z=self.z, side=side, viewer_id=self.viewer_id)


@dataclass(frozen=True)
class Viewer:
    '''
    A viewer, i.e. a pair of eyes.

    Attributes:
        viewer_id (int): Identifier of the viewer.
        left (Eye): The left eye.
        right (Eye): The right eye.
    '''
    viewer_id: int
    left: Eye
    right: Eye

    @classmethod
    def at(cls, x: float, z: float, viewer_id: int = 0, ipd: float = DEFAULT_IPD) -> 'Viewer':
        '''
        A viewer whose head is centered at (x, z), the left eye at x - ipd/2.

        Args:
            x (float): Lateral position of the head center (m).
            z (float): Viewing distance (m).
            viewer_id (int): Identifier of the viewer. Default is 0.
            ipd (float): Interpupillary distance (m). Default is 0.063.

        Returns:
            Viewer: The viewer.
        '''
        return cls(
            viewer_id=viewer_id,
            left=Eye(x=x - ipd / 2, z=z, side=EyeSide.LEFT, viewer_id=viewer_id),
            right=Eye(x=x + ipd / 2, z=z, side=EyeSide.RIGHT, viewer_id=viewer_id),
        )

    @property
    def eyes(self) -> Tuple[Eye, Eye]:
        return (self.left, self.right)

    @property
    def ipd(self) -> float:
        return self.right.x - self.left.x


@dataclass(frozen=True, eq=False)
class LedMask:
    '''
    On/off state of every backlight LED column during one phase.

    Attributes:
        bits (np.ndarray): Read-only boolean vector, one entry per LED column (index 0 is the leftmost column).
    '''
    bits: np.ndarray

    def __post_init__(self):
        bits = np.array(self.bits, dtype=bool).reshape(-1)
        bits.setflags(write=False)
        object.__setattr__(self, 'bits', bits)

    @classmethod
    def off(cls, length: int) -> 'LedMask':
        return cls(np.zeros(length, dtype=bool))

    @classmethod
    def from_columns(cls, length: int, columns: Iterable[int]) -> 'LedMask':
        '''
        A mask of the given length with exactly the listed columns lit.
        '''
        bits = np.zeros(length, dtype=bool)
        bits[list(columns)] = True
        return cls(bits)

    def __len__(self) -> int:
        return self.bits.size

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, LedMask):
            return NotImplemented
        return np.array_equal(self.bits, other.bits)

    def __hash__(self) -> int:
        return hash(self.bits.tobytes())

    def __or__(self, other: 'LedMask') -> 'LedMask':
        self._check_length(other)
        return LedMask(self.bits | other.bits)

    def __and__(self, other: 'LedMask') -> 'LedMask':
        self._check_length(other)
        return LedMask(self.bits & other.bits)

    def __invert__(self) -> 'LedMask':
        return LedMask(~self.bits)

    def _check_length(self, other: 'LedMask') -> None:
        if len(self) != len(other):
            raise MaskLengthMismatch(f'mask lengths differ: {len(self)} != {len(other)}')

    def any(self) -> bool:
        return bool(self.bits.any())

    def count(self) -> int:
        return int(self.bits.sum())

    def lit_columns(self) -> List[int]:
        return [int(i) for i in np.flatnonzero(self.bits)]

    def mirrored(self) -> 'LedMask':
        '''
        The mask with the column order reversed (reflection about the screen center).
        '''
        return LedMask(self.bits[::-1])

    def dilated(self, columns: int) -> 'LedMask':
        '''
        The mask grown by the given number of columns on each side of every lit column.
        '''
        bits = self.bits.copy()
        for shift in range(1, columns + 1):
            bits[shift:] |= self.bits[:-shift]
            bits[:-shift] |= self.bits[shift:]
        return LedMask(bits)

    def to_hex(self) -> str:
        '''
        The mask as a zero-padded hexadecimal number, bit i being column i.
        '''
        value = 0
        for i in np.flatnonzero(self.bits):
            value |= 1 << int(i)
        return format(value, f'0{(len(self) + 3) // 4}x')

    def __repr__(self) -> str:
        return f'LedMask({self.to_hex()})'


@dataclass(frozen=True, eq=False)
class IntensityProfile:
    '''
    Relative intensity sampled along a lateral line of a viewing plane.

    Attributes:
        z (float): Distance of the viewing plane (m).
        xs (np.ndarray): Strictly increasing sample positions (m).
        values (np.ndarray): Non-negative relative intensities, one per sample.
    '''
    z: float
    xs: np.ndarray
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        xs = np.array(self.xs, dtype=float).reshape(-1)
        values = np.array(self.values, dtype=float).reshape(-1)
        check_grid(xs)

        if values.shape != xs.shape:
            raise EmptyGrid(f'{values.size} values for {xs.size} grid points')
        if np.any(values < 0) or not np.all(np.isfinite(values)):
            raise ValueError('intensity values must be finite and >= 0')

        xs.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, 'xs', xs)
        object.__setattr__(self, 'values', values)

    def __add__(self, other: 'IntensityProfile') -> 'IntensityProfile':
        if self.z != other.z or not np.array_equal(self.xs, other.xs):
            raise EmptyGrid('profiles do not share a plane and grid')
        return IntensityProfile(self.z, self.xs, self.values + other.values)

    def peak_x(self) -> float:
        '''
        Position of the (first) maximum of the profile.
        '''
        return float(self.xs[int(np.argmax(self.values))])

    def fwhm(self) -> float:
        '''
        Full width at half maximum of the highest peak, measured between the outermost grid points of the
        contiguous run above half maximum that contains the peak.

        Returns:
            float: The width (m), 0 for an all-zero profile.
        '''
        peak = int(np.argmax(self.values))
        half = self.values[peak] / 2
        if half <= 0:
            return 0.0

        lo = peak
        while lo > 0 and self.values[lo - 1] >= half:
            lo -= 1
        hi = peak
        while hi < self.values.size - 1 and self.values[hi + 1] >= half:
            hi += 1
        return float(self.xs[hi] - self.xs[lo])


def check_grid(xs: np.ndarray) -> None:
    '''
    Checks that a sampling grid is non-empty and strictly increasing.

    Raises:
        EmptyGrid: If it is not.
    '''
    if xs.size == 0:
        raise EmptyGrid('the grid is empty')
    if xs.size > 1 and not np.all(np.diff(xs) > 0):
        raise EmptyGrid('the grid must be strictly increasing')
