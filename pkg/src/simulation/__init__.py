"""Per-round network simulation: mobility, trees, sensing, trust and aggregation."""
