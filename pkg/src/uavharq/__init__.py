"""Link-level study of HARQ feedback loss on interference-asymmetric UAV links."""

__version__ = "0.1.0"
