import csv
import hashlib
import io
import logging
import os
import tempfile
from pathlib import Path
from typing import Iterable, Sequence, Union


logger = logging.getLogger(__name__)


def fmt(value: float) -> str:
    '''
    Fixed 9-significant-digit scientific notation, the format of every number written to an artifact.
    '''
    return f'{float(value):.8e}'


def csv_bytes(header: Sequence[str], rows: Iterable[Sequence[object]]) -> bytes:
    '''
    Render rows as CSV with '\\n' line endings. Floats are formatted with `fmt`, everything else with str.

    Args:
        header (Sequence[str]): The column names.
        rows (Iterable[Sequence[object]]): The records.

    Returns:
        bytes: The ASCII encoded table.
    '''
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) if isinstance(v, float) else str(v) for v in row])
    return buffer.getvalue().encode('ascii')


def scenario_digest(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()[:12]


def artifact_name(subcommand: str, digest: str, suffix: str, tag: str = '') -> str:
    '''
    File name of an artifact: `<subcommand>[-<tag>]-<digest>.<suffix>`.
    '''
    stem = f'{subcommand}-{tag}' if tag else subcommand
    return f'{stem}-{digest}.{suffix}'


def write_atomic(data: bytes, save_path: Union[str, Path]) -> Path:
    '''
    Write bytes to a file through a temporary file in the same directory, then rename it into place.

    Args:
        data (bytes): The content.
        save_path (Union[str, Path]): The destination.

    Returns:
        Path: The written path.

    Raises:
        FileNotFoundError: If the parent directory doesn't exist.
    '''
    save_path = Path(save_path)

    if not save_path.parent.is_dir():
        raise FileNotFoundError(f'Parent path: `{save_path.parent}` doesn\'t exist.')

    fd, tmp = tempfile.mkstemp(dir=save_path.parent, prefix=f'.{save_path.name}.', suffix='.tmp')
    try:
        with os.fdopen(fd, 'wb') as f:
            f.write(data)
        os.replace(tmp, save_path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise

    logger.info('wrote %s (%d bytes)', save_path, len(data))
    return save_path
