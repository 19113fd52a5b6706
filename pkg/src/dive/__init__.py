"""Literature-to-database extraction, scoring, and inverse-design toolkit
for solid-state hydrogen storage materials."""

__version__ = "0.1.0"
