"""Robust Oracle Lab : apprentissage robuste avec oracles d'attaque."""
