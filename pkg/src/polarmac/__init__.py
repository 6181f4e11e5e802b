"""Multi-user polar codes for the Gaussian multiple access channel."""
