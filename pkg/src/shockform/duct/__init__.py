"""Variable-area duct and spherically symmetric flow."""
