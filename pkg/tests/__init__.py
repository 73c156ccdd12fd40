# Test package for gwntf
