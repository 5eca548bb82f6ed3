"""Analysis package: pure numerical stages of the pipeline."""
