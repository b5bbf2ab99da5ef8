"""Core modules."""



