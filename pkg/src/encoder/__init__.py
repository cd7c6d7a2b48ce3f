"""Experience encoder front end."""
