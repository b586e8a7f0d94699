VERSION = '1.2'
