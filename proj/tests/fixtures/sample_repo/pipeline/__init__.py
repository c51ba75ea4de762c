"""Record processing pipeline: stages and the runner driving them."""
