import os
import json
import logging

from packaging.version import InvalidVersion, Version

from qbdd import conf

logger = logging.getLogger(__name__)

TABLE_VERSION = Version("1.0")


def cell_key(solver, n, q, r, beta=None):
    """Key of one parameter cell, e.g. 'poly-n8-q65536-r1' or 'tradeoff-n8-q4096-r2-b4'."""
    key = f"{solver}-n{n}-q{q}-r{r}"
    if beta is not None:
        key += f"-b{beta}"
    return key


class CalibrationStore:
    """Versioned on-disk table of calibrated eps1 thresholds per parameter cell."""

    def __init__(self, cache_dir=None):
        """Initialize the store, creating its directory when possible."""
        self.cache_dir = cache_dir or conf.get_settings().calibration_dir
        self.tables = {}

        if not os.path.exists(self.cache_dir):
            try:
                os.makedirs(self.cache_dir)
            except OSError as e:
                logger.warning("could not create calibration directory %s: %s", self.cache_dir, e)

    def table_path(self, name):
        return os.path.join(self.cache_dir, f"{name}.json")

    def load(self, name="default"):
        """
        Load a calibration table.

        Args:
            name: table name (file stem inside the cache directory)

        Returns:
            Dictionary of cells; empty when the table is missing, unreadable or
            written by an incompatible version
        """
        if name in self.tables:
            return self.tables[name]
        cells = {}
        path = self.table_path(name)
        if os.path.exists(path):
            try:
                with open(path, 'r', encoding='utf-8') as f:
                    record = json.load(f)
                version = Version(str(record.get("version", "0")))
                if version.major != TABLE_VERSION.major:
                    logger.warning("calibration table %s has version %s, expected %s.x; ignoring it",
                                   path, version, TABLE_VERSION.major)
                else:
                    cells = record.get("cells", {})
            except (OSError, ValueError, InvalidVersion) as e:
                logger.warning("could not read calibration table %s: %s", path, e)
        self.tables[name] = cells
        return cells

    def lookup(self, key, name="default"):
        """Calibrated eps1 threshold for a cell, or None (callers fall back to feasible sizing)."""
        cell = self.load(name).get(key)
        if cell is None:
            logger.info("no calibration for %s, falling back to feasible sizing", key)
            return None
        return cell.get("threshold")

    def record(self, key, threshold, rates, name="default"):
        self.load(name)[key] = {"threshold": threshold, "rates": rates}

    def to_json(self, name="default"):
        return {"version": str(TABLE_VERSION), "cells": self.load(name)}

    def save(self, name="default"):
        path = self.table_path(name)
        try:
            with open(path, 'w', encoding='utf-8') as f:
                json.dump(self.to_json(name), f, sort_keys=True, indent=2)
                f.write("\n")
        except OSError as e:
            logger.warning("could not save calibration table %s: %s", path, e)
            return None
        return path
