import os

from hypothesis import settings

settings.register_profile("ci", max_examples=10, deadline=None)
settings.register_profile("dev", deadline=None)
settings.load_profile(os.getenv("HYPOTHESIS_PROFILE", "dev"))
