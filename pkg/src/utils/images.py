from src.interleaver import ViewImage
from src.viewsim import SweepReport, ViewClass

import numpy as np
from PIL import Image

import io
import logging
from pathlib import Path
from typing import Union


logger = logging.getLogger(__name__)

# RGB of every sweep class in the strip image
CLASS_COLORS = {
    ViewClass.RIGHT: (255, 0, 0),
    ViewClass.LEFT: (0, 255, 0),
    ViewClass.GAP: (0, 0, 0),
    ViewClass.MIXED: (255, 255, 0),
}

STRIP_HEIGHT = 32


def _encode(array: np.ndarray) -> bytes:
    buffer = io.BytesIO()
    # Pillow's PPM plugin writes binary P5 for 2D uint8 arrays and P6 for RGB ones
    Image.fromarray(array).save(buffer, format='PPM')
    return buffer.getvalue()


def to_gray8(image: ViewImage) -> np.ndarray:
    # samples above 1 saturate
    return np.rint(np.clip(image.samples, 0.0, 1.0) * 255).astype(np.uint8)


def pgm_bytes(image: ViewImage) -> bytes:
    '''
    Binary PGM (P5, maxval 255) encoding of a monochrome image.
    '''
    return _encode(to_gray8(image))


def ppm_bytes(rgb: np.ndarray) -> bytes:
    '''
    Binary PPM (P6, maxval 255) encoding of a height x width x 3 uint8 array.
    '''
    return _encode(np.ascontiguousarray(rgb, dtype=np.uint8))


def read_view(path: Union[str, Path]) -> ViewImage:
    '''
    Load a PGM/PPM (or any Pillow readable) file as a monochrome view with samples in [0, 1].
    '''
    with Image.open(path) as img:
        gray = np.asarray(img.convert('L'), dtype=float)

    logger.debug('read %s: %d x %d', path, gray.shape[1], gray.shape[0])
    return ViewImage(gray / 255.0)


def sweep_strip(report: SweepReport, height: int = STRIP_HEIGHT) -> np.ndarray:
    '''
    Paint a sweep as vertical stripes, one pixel column per entry: Right red, Left green, Gap black,
    Mixed yellow.

    Returns:
        np.ndarray: A height x entries x 3 uint8 array.
    '''
    row = np.array([CLASS_COLORS[entry.view_class] for entry in report.entries], dtype=np.uint8).reshape(-1, 3)
    return np.repeat(row[None, :, :], height, axis=0)
