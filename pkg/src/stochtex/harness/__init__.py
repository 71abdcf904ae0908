"""Scene renderer, statistics and command-line driver."""
