"""Data models."""



