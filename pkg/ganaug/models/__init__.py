"""Network specifications, parameter containers and pydantic schemas."""
