"""PeriodWave: period-aware conditional flow matching for waveform generation."""

__version__ = "0.1.0"
