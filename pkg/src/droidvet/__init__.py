"""droidvet: agentic discovery and PoC-backed validation of Android APK vulnerabilities."""

__version__ = "0.1.0"
