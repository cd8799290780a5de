from hypothesis import settings

settings.register_profile('gps', derandomize=True, deadline=None)
settings.load_profile('gps')
