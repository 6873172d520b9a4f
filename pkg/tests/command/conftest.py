"""Define helpers for testing command module"""
import os
import csv
import json


def read_json(*path):
    with open(os.path.join(*path), 'r') as fileobj:
        return json.load(fileobj)


def read_bytes(*path):
    with open(os.path.join(*path), 'rb') as fileobj:
        return fileobj.read()


def read_csv(*path):
    with open(os.path.join(*path), 'r', newline='') as fileobj:
        return list(csv.DictReader(fileobj))
