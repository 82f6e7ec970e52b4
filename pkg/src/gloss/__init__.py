"""Desk-scale location-aware service infrastructure: an XML event
pipeline with map/radar/hearsay/trails services, a deployment engine
driving simulated thin servers, an event-matching engine, and a sensor
collection stack with transition storage and replay."""

__version__ = "0.1.0"
