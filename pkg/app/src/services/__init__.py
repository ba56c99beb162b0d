"""House model, identification, plant, planning, simulation and analysis services."""
