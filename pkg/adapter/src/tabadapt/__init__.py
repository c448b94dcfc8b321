"""Bridge outside regression backends into benchmark evaluation runs.

The harness hands this tool a table CSV, the table's manifest, and a
split manifest, all as files.  The tool fits the requested backend on
the context rows named by the split, predicts the query rows, and
writes a prediction file the harness can score.  It never re-splits
the data and never computes metrics; that stays on the harness side.
"""

__version__ = "0.1.0"
