"""Post-hoc analytics: every metric is a deterministic function of
(event log, config)."""
