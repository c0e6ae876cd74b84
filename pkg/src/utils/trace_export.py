from src.schedule import FrameSchedule, schedule_trace
from src.utils.export import csv_bytes, fmt

from vcd import VCDWriter

import io
import logging
from enum import Enum


logger = logging.getLogger(__name__)


class TraceFormat(Enum):
    CSV = 'csv'
    VCD = 'vcd'


def _microseconds(t: float) -> int:
    return int(round(t * 1e6))


def _export_csv(schedule: FrameSchedule, cycles: int) -> bytes:
    rows = (
        (event.time, event.lcd_state, event.mask.to_hex())
        for event in schedule_trace(schedule, cycles).events
    )
    return csv_bytes(['t_s', 'lcd_state', 'mask_hex'], rows)


def _export_vcd(schedule: FrameSchedule, cycles: int) -> bytes:
    trace = schedule_trace(schedule, cycles)
    buffer = io.StringIO()

    # date and version left empty so equal schedules give equal bytes
    writer = VCDWriter(buffer, timescale='1 us', date='', version='',
                       comment=f'frame_period {fmt(schedule.frame_period)} s')
    try:
        leds = [
            writer.register_var('backlight', f'led{i}', 'wire', size=1, init=0, ident=f'led{i}')
            for i in range(trace.led_column_count)
        ]
        lcd = writer.register_var('backlight', 'lcd_state', 'reg', size=8, init=0, ident='lcd')

        previous = [0] * trace.led_column_count
        for event in trace.events:
            timestamp = _microseconds(event.time)
            writer.change(lcd, timestamp, event.lcd_state.code)
            for column, bit in enumerate(event.mask.bits):
                if int(bit) != previous[column]:
                    writer.change(leds[column], timestamp, int(bit))
                    previous[column] = int(bit)
    finally:
        writer.close(_microseconds(trace.cycles * trace.frame_period))

    return buffer.getvalue().encode('ascii')


def export_trace(schedule: FrameSchedule, cycles: int = 1, trace_format: TraceFormat = TraceFormat.CSV) -> bytes:
    '''
    Serialize the change events of a schedule.

    CSV rows are `t_s,lcd_state,mask_hex`, one per event. The VCD dump has one 1-bit wire per LED column
    (`led0`, `led1`, ...) and an 8-bit `lcd_state` register holding 2 * view + 1 while the image is held,
    2 * view while it is refreshed, on a 1 us timescale.

    Args:
        schedule (FrameSchedule): The schedule to export.
        cycles (int): How many frames to dump. Default is 1.
        trace_format (TraceFormat): The output format. Default is CSV.

    Returns:
        bytes: The serialized trace, identical for equal inputs.
    '''
    if cycles < 1:
        raise ValueError(f'cycles must be >= 1, got {cycles}')

    logger.debug('exporting %d cycle(s) as %s', cycles, trace_format.value)
    if trace_format is TraceFormat.VCD:
        return _export_vcd(schedule, cycles)
    return _export_csv(schedule, cycles)
