# Run registry: SQLAlchemy models and persistence for study runs
