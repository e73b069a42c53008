"""Weather degradations: haze (scattering) and rain (streaks plus drops)."""

from .handles import HazeHandle, RainStreakHandle
from .haze import (
    HazeState,
    dark_channel_transmission,
    haze_apply,
    haze_invert,
    haze_partials,
)
from .rain import (
    RainState,
    dynamic_rain_step,
    rain_streak_apply,
    raindrop_apply,
    render_streaks,
)

__all__ = [
    "HazeHandle",
    "HazeState",
    "RainState",
    "RainStreakHandle",
    "dark_channel_transmission",
    "dynamic_rain_step",
    "haze_apply",
    "haze_invert",
    "haze_partials",
    "rain_streak_apply",
    "raindrop_apply",
    "render_streaks",
]
