"""Sensor collection stack: device frame codecs, the polling/listening
collector, transition persistence, the broker service, replay calendars,
and GPS sentence handling."""

from .frames import (  # noqa: F401
    FRAME_VERSION,
    BadVersion,
    LengthMismatch,
    MappedSensor,
    SensorSetMismatch,
    StateTable,
    aggregate_second,
    decode_frame,
    diff,
    encode_frame,
    ilon_poll,
)
from .config import ConfigError, DeviceConfig, SensorConfig, parse_sensor_config  # noqa: F401
from .store import BadRange, TimeRegression, TransitionRecord, TransitionStore  # noqa: F401
from .broker import Broker  # noqa: F401
from .calendar import (  # noqa: F401
    NavigationUnavailable,
    PlayableCalendar,
    ReplayModel,
    SensorCalendar,
    calendar_step,
    replay,
)
from .nmea import BadChecksum, UnsupportedSentence, VoidFix, feed_location, parse_nmea  # noqa: F401
from .datapull import DataPull, submit_update  # noqa: F401
from .simulators import HCS12Simulator, ILonSimulator  # noqa: F401
