from hypothesis import settings

settings.register_profile("srlkit", max_examples=60, deadline=None)
settings.load_profile("srlkit")
