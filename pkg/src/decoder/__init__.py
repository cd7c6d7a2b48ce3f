"""Experience-conditioned decoder, sampling stack and checkpoints."""
