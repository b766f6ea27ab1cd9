def pytest_configure(config):
    config.addinivalue_line("markers", "slow: acceptance scale Monte Carlo runs, deselect with -m 'not slow'")
