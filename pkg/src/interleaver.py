from src.display import EyeSide
from src.errors import DimensionMismatch

import numpy as np

from dataclasses import dataclass
from fractions import Fraction
import logging
import math
from typing import Optional, Tuple, Union


logger = logging.getLogger(__name__)

# Label values of PanelFrame.labels
LEFT_LABEL = 0
RIGHT_LABEL = 1


@dataclass(frozen=True, eq=False)
class ViewImage:
    '''
    A monochrome image on the sub-pixel grid.

    Attributes:
        samples (np.ndarray): height x width non-negative intensities, read-only. Views lie in [0, 1].
    '''
    samples: np.ndarray

    def __post_init__(self) -> None:
        samples = np.array(self.samples, dtype=float)
        if samples.ndim != 2 or samples.size == 0:
            raise DimensionMismatch(f'an image needs a non-empty 2D sample array, got shape {samples.shape}')
        if not np.all(np.isfinite(samples)) or samples.min() < 0:
            raise ValueError('image samples must be finite and >= 0')
        samples.setflags(write=False)
        object.__setattr__(self, 'samples', samples)

    @property
    def width(self) -> int:
        return self.samples.shape[1]

    @property
    def height(self) -> int:
        return self.samples.shape[0]

    @classmethod
    def constant(cls, width: int, height: int, value: float = 1.0) -> 'ViewImage':
        return cls(np.full((height, width), value, dtype=float))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ViewImage):
            return NotImplemented
        return np.array_equal(self.samples, other.samples)

    def __hash__(self) -> int:
        return hash((self.samples.shape, self.samples.tobytes()))


@dataclass(frozen=True)
class InterleavePattern:
    '''
    How the two views share the panel's sub-pixel columns.

    Attributes:
        columns_per_lens (int): Adjacent columns given to one view before switching. Default is 2.
        slant_columns_per_row (Fraction): Horizontal offset of the pattern per row. Default is 0.
        field_shift (int): Columns the pattern moves per field. Default is 0.
    '''
    columns_per_lens: int = 2
    slant_columns_per_row: Fraction = Fraction(0)
    field_shift: int = 0

    def __post_init__(self) -> None:
        if self.columns_per_lens < 1:
            raise ValueError(f'columns_per_lens must be >= 1, got {self.columns_per_lens}')
        object.__setattr__(self, 'slant_columns_per_row', Fraction(self.slant_columns_per_row))


@dataclass(frozen=True, eq=False)
class PanelFrame:
    '''
    What the panel shows during one field, with the source eye of every sub-pixel.

    Attributes:
        image (ViewImage): The panel image.
        labels (np.ndarray): LEFT_LABEL / RIGHT_LABEL per sub-pixel, same shape as the image.
    '''
    image: ViewImage
    labels: np.ndarray

    def __post_init__(self) -> None:
        labels = np.array(self.labels, dtype=np.uint8)
        if labels.shape != self.image.samples.shape:
            raise DimensionMismatch(f'labels {labels.shape} do not match image {self.image.samples.shape}')
        labels.setflags(write=False)
        object.__setattr__(self, 'labels', labels)


def left_mask(pattern: InterleavePattern, height: int, width: int, field: int = 0) -> np.ndarray:
    '''
    Which panel sub-pixels source the left view.

    Sub-pixel (r, c) is left when (c - floor(r * slant) - field * field_shift) mod (2 * columns_per_lens)
    is below columns_per_lens.

    Returns:
        np.ndarray: A height x width boolean array.
    '''
    slant = pattern.slant_columns_per_row
    offsets = np.array([math.floor(r * slant) for r in range(height)], dtype=np.int64)
    columns = np.arange(width, dtype=np.int64)

    phase = columns[None, :] - offsets[:, None] - field * pattern.field_shift
    return np.mod(phase, 2 * pattern.columns_per_lens) < pattern.columns_per_lens


def _source_columns(width: int, source_width: int) -> Tuple[np.ndarray, np.ndarray]:
    # panel column c shows source column c // 2; columns past the source are black
    source = np.arange(width) // 2
    return np.minimum(source, source_width - 1), source < source_width


def interleave_frame(left: ViewImage, right: ViewImage, pattern: InterleavePattern, field: int = 0,
                     panel_width: Optional[int] = None) -> PanelFrame:
    '''
    Compose the panel frame of one field from a stereo pair.

    Args:
        left (ViewImage): The left view.
        right (ViewImage): The right view, same size as left.
        pattern (InterleavePattern): The column assignment.
        field (int): The field index. Default is 0.
        panel_width (Optional[int]): Sub-pixel columns of the panel; at least twice the view width.
            Default is twice the view width.

    Returns:
        PanelFrame: The panel image with its source labels.

    Raises:
        DimensionMismatch: If the views differ in size or the panel is too narrow.
    '''
    if left.samples.shape != right.samples.shape:
        raise DimensionMismatch(f'left {left.samples.shape} and right {right.samples.shape} differ')

    width = 2 * left.width if panel_width is None else panel_width
    if width < 2 * left.width:
        raise DimensionMismatch(f'panel width {width} is below twice the view width {left.width}')

    is_left = left_mask(pattern, left.height, width, field)
    source, inside = _source_columns(width, left.width)

    samples = np.where(is_left, left.samples[:, source], right.samples[:, source]) * inside[None, :]
    labels = np.where(is_left, LEFT_LABEL, RIGHT_LABEL)

    logger.debug('interleaved field %d into %d x %d', field, left.height, width)
    return PanelFrame(ViewImage(samples), labels)


def interleave(left: ViewImage, right: ViewImage, pattern: InterleavePattern, field: int = 0,
               panel_width: Optional[int] = None) -> ViewImage:
    '''
    The panel image of one field; see interleave_frame.
    '''
    return interleave_frame(left, right, pattern, field, panel_width).image


def single_view_frame(view: ViewImage, side: Union[EyeSide, int], panel_width: Optional[int] = None) -> PanelFrame:
    '''
    A panel frame showing one full view, every source column on two sub-pixel columns.

    Args:
        view (ViewImage): The view.
        side (Union[EyeSide, int]): The eye the view is for, or a raw label.
        panel_width (Optional[int]): Sub-pixel columns of the panel. Default is twice the view width.

    Returns:
        PanelFrame: The frame with a uniform label.
    '''
    width = 2 * view.width if panel_width is None else panel_width
    if width < 2 * view.width:
        raise DimensionMismatch(f'panel width {width} is below twice the view width {view.width}')

    if isinstance(side, EyeSide):
        side = LEFT_LABEL if side is EyeSide.LEFT else RIGHT_LABEL

    source, inside = _source_columns(width, view.width)
    samples = view.samples[:, source] * inside[None, :]
    return PanelFrame(ViewImage(samples), np.full(samples.shape, side, dtype=np.uint8))


def deinterleave(frame: ViewImage, pattern: InterleavePattern, field: int = 0,
                 source_width: Optional[int] = None) -> Tuple[ViewImage, ViewImage]:
    '''
    Recover the two views from a panel image.

    Each source column (r, s) is read from whichever of panel columns 2s and 2s + 1 the pattern gives to that
    view; source samples no panel column shows are left at 0.

    Args:
        frame (ViewImage): The panel image.
        pattern (InterleavePattern): The pattern used to build it.
        field (int): The field it was built for. Default is 0.
        source_width (Optional[int]): Width of the views. Default is half the panel width.

    Returns:
        Tuple[ViewImage, ViewImage]: The (left, right) estimates.

    Raises:
        DimensionMismatch: If the panel is narrower than twice the source width.
    '''
    width = frame.width // 2 if source_width is None else source_width
    if width < 1 or frame.width < 2 * width:
        raise DimensionMismatch(f'panel width {frame.width} cannot hold two views of width {width}')

    is_left = left_mask(pattern, frame.height, 2 * width, field)
    panel = frame.samples[:, :2 * width]

    estimates = []
    for wanted in (is_left, ~is_left):
        picked = np.where(wanted, panel, 0.0).reshape(frame.height, width, 2)
        # both columns of a pair carry the same source sample when both are assigned
        estimates.append(ViewImage(picked.max(axis=2)))

    return estimates[0], estimates[1]
